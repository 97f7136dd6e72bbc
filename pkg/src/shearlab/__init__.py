"""ShearLab - pseudo-spectral laboratory for monotone shear flow stability."""

__version__ = "0.4.0"
