# major.minor.patch[-label]
_dev_version = "dev"
__version__ = "0.3.0"
