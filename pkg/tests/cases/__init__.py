"""Gather the cases shared by the tests.

Import the created cases so they are easily accessible too.
"""

from .neural import ActivationCases, LayerCases
from .repositories import FileRepositoryCases
from .testers import FileRepositoryTester, LocalFileRepositoryTester

__all__ = [
    "ActivationCases",
    "FileRepositoryCases",
    "FileRepositoryTester",
    "LayerCases",
    "LocalFileRepositoryTester",
]
