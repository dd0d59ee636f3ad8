"""Tetrahedral image-to-mesh conversion with two-level parallel refinement.

Layers, bottom to top:

- ``geom``: exact orientation/circumsphere predicates and element quality.
- ``image``: labeled voxel volumes, synthetic phantoms, point classification.
- ``delaunay``: sequential Bowyer-Watson kernel and quality-driven refinement.
- ``speculative``: multi-threaded refinement of one region with per-tet
  claiming and rollback.
- ``octree``: uniform spatial decomposition, influence regions, and the
  independence test used by the scheduler.
- ``wire`` / ``transport`` / ``master_worker``: the distributed layer
  (submesh packing, message transports, master-worker protocol).
- ``metrics``: wall-clock breakdown accounting and mesh quality reports.
"""

__version__ = "0.1.0"
