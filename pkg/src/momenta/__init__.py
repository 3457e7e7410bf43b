"""momenta: moment/SDP relaxations for non-minimal polynomial problems and
deterministic consensus maximization, with 3D-vision instantiations."""

__version__ = "0.1.0"
