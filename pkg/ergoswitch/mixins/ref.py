from typing import Optional
from uuid import uuid4

from ergoswitch.exceptions import ErgoswitchException


class RefMixin:
    ref_prefix = ""

    def __init__(self, ref: Optional[str] = None):
        """
        Handle reference of an object.

        References end up in CSV reports, so they cannot contain a comma nor a
        line break.

        Attributes:
            ref: reference of the instance.

        """
        self.ref = ref  # type: ignore

    @property
    def ref(self) -> str:
        """
        Return ref of current instance.

        Returns:
            reference of current instance.
        """
        return self._ref

    @ref.setter
    def ref(self, ref: Optional[str] = None) -> None:
        """
        Set current instance reference.

        Arguments:
            ref: predefined reference name

        Raises:
            ergoswitch.exceptions.ErgoswitchException: if ref cannot be written
                to a CSV cell.
        """
        if ref is None:
            ref = f"{self.ref_prefix}{str(uuid4())[:5]}"
        if not isinstance(ref, str) or not ref.strip():
            raise ErgoswitchException(f"invalid ref: {ref!r}")
        if any(c in ref for c in (",", "\n", "\r")):
            raise ErgoswitchException(f"ref cannot contain separators: {ref!r}")
        self._ref = ref
