import numpy as np
import pytest

from autopos import Constellation, ErrorClass, MeasurementMatrix


@pytest.fixture
def exact4() -> Constellation:
    """Four-node fixture with known geometry: a frame triangle plus an
    interior node."""
    return Constellation.from_coords([(0, 0), (4, 0), (2, 3), (1, 1)])


def exact_matrix(constellation: Constellation, epoch: int = 0) -> MeasurementMatrix:
    """Noise-free measurement matrix: both directions carry the true distance."""
    dist = constellation.distance_matrix()
    n = constellation.count
    ranges = dist.copy()
    np.fill_diagonal(ranges, np.nan)
    classes = np.full((n, n), int(ErrorClass.LOS), dtype=np.int8)
    np.fill_diagonal(classes, int(ErrorClass.FAILED))
    return MeasurementMatrix(epoch=epoch, ranges=ranges, classes=classes)


def drop_pair(matrix: MeasurementMatrix, i: int, j: int) -> MeasurementMatrix:
    """Copy of the matrix with both directions of pair {i, j} failed."""
    ranges = matrix.ranges.copy()
    classes = matrix.classes.copy()
    for a, b in ((i, j), (j, i)):
        ranges[a, b] = np.nan
        classes[a, b] = int(ErrorClass.FAILED)
    return MeasurementMatrix(epoch=matrix.epoch, ranges=ranges, classes=classes)


def drop_directed(matrix: MeasurementMatrix, i: int, j: int) -> MeasurementMatrix:
    """Copy of the matrix with only the directed entry (i -> j) failed."""
    ranges = matrix.ranges.copy()
    classes = matrix.classes.copy()
    ranges[i, j] = np.nan
    classes[i, j] = int(ErrorClass.FAILED)
    return MeasurementMatrix(epoch=matrix.epoch, ranges=ranges, classes=classes)
