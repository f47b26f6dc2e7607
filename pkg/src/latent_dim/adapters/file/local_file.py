"""Define the local filesystem adapter."""

import logging
import os
from typing import AnyStr, List

from ...model import File
from .abstract import FileRepository

log = logging.getLogger(__name__)


class LocalFileRepository(FileRepository[AnyStr]):
    """Store the study artifacts in a local directory."""

    def __init__(self, workdir: str) -> None:
        """Initialize the object.

        Creates the working directory if it doesn't exist.
        """
        workdir = os.path.expanduser(workdir).rstrip("/") or "/"
        if not os.path.exists(workdir):
            os.makedirs(workdir)
        super().__init__(workdir=workdir)

    def load(self, file_: File[AnyStr]) -> File[AnyStr]:
        """Load the content of the file from the persistence system."""
        log.debug(f"Loading content of file {file_.path}")
        file_ = self.fix_path(file_)
        if file_.is_bytes:
            mode = "rb"
            encoding = None
        else:
            mode = "r"
            encoding = "utf-8"

        with open(file_.path, mode, encoding=encoding) as file_descriptor:
            # W0212: Access to private attribute, but it's managed by us so it's OK
            file_._content = file_descriptor.read()  # noqa: W0212
        return file_

    def save(self, file_: File[AnyStr]) -> File[AnyStr]:
        """Save the content of the file into the persistence system.

        Missing parent directories are created.
        """
        file_ = self.fix_path(file_)
        log.debug(f"Saving the content of file {file_.path}")
        os.makedirs(file_.dirname, exist_ok=True)
        if file_.is_bytes:
            with open(file_.path, "wb") as file_descriptor:
                file_descriptor.write(file_.content)
        else:
            with open(file_.path, "w", encoding="utf-8", newline="\n") as file_descriptor:
                file_descriptor.write(file_.content)
        return file_

    def delete(self, file_: File[AnyStr]) -> None:
        """Delete the file from the persistence system."""
        file_ = self.fix_path(file_)
        log.debug(f"Deleting the content of file {file_.path}")
        try:
            os.remove(file_.path)
        except FileNotFoundError:
            log.warning(
                f"Can't remove the file {file_.path} as it doesn't exist "
                "in the file repository."
            )

    def exists(self, path: str) -> bool:
        """Tell if a file is stored under the relative path."""
        return os.path.isfile(os.path.join(self.workdir, path))

    def list_files(self, directory: str = ".") -> List[str]:
        """Return the sorted relative paths of the files under a directory."""
        root = os.path.join(self.workdir, directory)
        return sorted(
            os.path.relpath(os.path.join(dirpath, filename), self.workdir)
            for dirpath, _, filenames in os.walk(root)
            for filename in filenames
        )
