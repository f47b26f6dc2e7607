"""Store the records persisted by the studies."""

import hashlib
import os
from datetime import datetime
from typing import AnyStr, Dict, Generic, List, Optional

from pydantic import BaseModel, Field, PrivateAttr

from .exceptions import FileContentNotLoadedError


class File(BaseModel, Generic[AnyStr]):
    """Model a computer file."""

    path: str
    created_at: Optional[datetime] = None
    updated_at: Optional[datetime] = None

    # The content is kept out of the exported fields.
    _content: Optional[AnyStr] = PrivateAttr(None)
    # If the content is of type bytes
    is_bytes: bool = False

    @classmethod
    def from_content(cls, path: str, content: AnyStr) -> "File[AnyStr]":
        """Build a file with its content already loaded."""
        file_ = cls(path=path, is_bytes=isinstance(content, bytes))
        file_._content = content  # noqa: W0212
        return file_

    @property
    def basename(self) -> str:
        """Return the name of the file."""
        return os.path.basename(self.path)

    @property
    def dirname(self) -> str:
        """Return the directory of the file."""
        return os.path.dirname(self.path)

    @property
    def extension(self) -> str:
        """Return the extension of the file."""
        return self.basename.split(".")[-1]

    @property
    def content(self) -> AnyStr:
        """Return the content of the file.

        Raises:
            FileContentNotLoadedError: if the content is not yet loaded.
        """
        if self._content is None:
            raise FileContentNotLoadedError(
                "The content of the file has not been loaded yet."
            )
        return self._content

    @property
    def checksum(self) -> str:
        """Return the sha256 of the content."""
        content = self.content
        data = content if isinstance(content, bytes) else content.encode("utf-8")
        return hashlib.sha256(data).hexdigest()


class ErrorDecayRow(BaseModel):
    """Store the errors and tails measured at one latent dimension."""

    n: int
    e_ae: float
    e_pod: float
    sqrt_tail_mu: float
    sqrt_tail_u: float


class Slopes(BaseModel):
    """Store the log-log decay rates of the error decay columns.

    A slope is None when there are less than two positive values to fit.
    """

    beta_ae: Optional[float] = None
    beta_pod: Optional[float] = None
    beta_mu: Optional[float] = None
    beta_u: Optional[float] = None


class ErrorDecayReport(BaseModel):
    """Gather the result of a latent dimension sweep."""

    problem: str
    rows: List[ErrorDecayRow] = Field(default_factory=list)
    slopes: Slopes = Field(default_factory=Slopes)
    pod_reference: Dict[int, float] = Field(default_factory=dict)
    config_hash: str
    seed: int
    started_at: datetime
    finished_at: Optional[datetime] = None

    def column(self, name: str) -> List[float]:
        """Return the values of a column of the rows."""
        return [getattr(row, name) for row in self.rows]


class Table1Report(BaseModel):
    """Store the relative test errors, as percentages, at a fixed latent dimension."""

    problem: str
    n: int
    pod_percent: float
    ae_percent: float
    dlrom_percent: float
    rank_limited: bool = False
    config_hash: str
    seed: int


class CheckpointManifest(BaseModel):
    """Tie together the three networks of a trained DL-ROM."""

    latent_dim: int
    config_hash: str
    files: Dict[str, str]
    checksums: Dict[str, str]


class CheckResult(BaseModel):
    """Store the outcome of a numerical self check."""

    name: str
    passed: bool
    detail: str = ""
