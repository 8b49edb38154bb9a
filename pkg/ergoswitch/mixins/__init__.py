from ergoswitch.mixins.ref import RefMixin


__all__ = [
    "RefMixin",
]
