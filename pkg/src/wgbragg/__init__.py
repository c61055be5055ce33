"""Collective Bragg scattering of a weak drive from an emitter array into a waveguide mode."""

__version__ = "0.1.0"

# Submodules are imported on first attribute access so that the CLI can pin
# BLAS thread-count environment variables before numpy is loaded.
_SUBMODULES = ("model", "closed_form", "steady", "lindblad", "experiments",
               "cli", "errors")


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_SUBMODULES))
