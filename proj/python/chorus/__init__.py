"""Bird sound identification from spectral histograms and kNN ranking."""

try:
    from . import _chorus
except ImportError:  # in-tree build: the extension sits next to the package
    import _chorus

from_module = _chorus.__dict__
__all__ = [name for name in from_module if not name.startswith("_")]
globals().update({name: from_module[name] for name in __all__})
__version__ = _chorus.__version__
del from_module
