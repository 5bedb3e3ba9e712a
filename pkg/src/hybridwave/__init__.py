"""High-order discontinuous Galerkin solver for the first-order acoustic
wave equation on hybrid meshes of hexahedra, wedges, pyramids and
tetrahedra."""

__version__ = "0.1.0"
