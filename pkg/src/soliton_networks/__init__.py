"""Self-similar expanding networks for curve shortening flow.

Expanders coming out of a cone of ``k`` half-lines are found as geodesic
Steiner networks for the metric ``exp(|x|^2) |dx|^2``; see :mod:`.geodesics`
for the arcs, :mod:`.steiner` for the network search and :mod:`.flow` for the
evolution and its independent check.
"""

__version__ = "0.1.0"
