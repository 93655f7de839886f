import hashlib
from pathlib import Path
from typing import Sequence, Union


class File:
    """
    Generic File class.

    Parameters
    ----------
    path:
        Path to the file.
    must_exist:
        Whether the file has to exist already (inputs) or may be created by a
        later write (outputs).
    """

    extensions: Sequence[str] = ()

    def __init__(self, path: Union[str, Path], must_exist: bool = True):
        self.path = Path(path).resolve()

        if must_exist and not self.path.is_file():
            raise FileNotFoundError(f"File not found: {self.path}")

        if self.extensions:
            self._validate_extension(self.path, self.extensions)

    @staticmethod
    def _validate_extension(path: Union[str, Path], extensions: Sequence[str]):
        """
        Check if the provided file extension is supported. Raise an exception
        if it is not supported.

        Parameters
        ----------
        path:
            Path to the file to validate.
        extensions:
            Lower-case extensions (with the leading dot) that are accepted.
        """
        path = Path(path)
        if path.suffix.lower() not in extensions:
            raise ValueError(
                f"Provided file must be one of the following types: {list(extensions)}. "
                f"Got: {path}"
            )

    @property
    def size(self) -> int:
        """
        Size of the File.

        Returns
        -------
        size:
            Size of the file in bytes. If the file does not exist, returns 0.
        """
        if self.path.exists():
            return self.path.stat().st_size
        else:
            return 0

    def checksum(self) -> str:
        """SHA-256 hex digest of the file contents."""
        digest = hashlib.sha256()
        with self.path.open("rb") as f:
            for chunk in iter(lambda: f.read(1 << 20), b""):
                digest.update(chunk)
        return digest.hexdigest()

    def read_text(self) -> str:
        """Reads the file as UTF-8 text."""
        return self.path.read_text(encoding="utf-8")

    def write_text(self, data: str, append: bool = False):
        """
        Writes text to the file, creating parent directories as needed.

        Parameters
        ----------
        data:
            The text to write.
        append:
            Append to the file instead of overwriting it.
        """
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a" if append else "w", encoding="utf-8") as f:
            f.write(data)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(path={self.path}, size={self.size} bytes)"
