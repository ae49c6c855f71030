from itertools import product

import numpy as np
from scipy.spatial import procrustes

from stealth_print.errors import GeometryError
from stealth_print.geometry.mask import ShapeMask


def _matrix_disparity(a: np.ndarray, b: np.ndarray) -> float:
    try:
        _, _, disparity = procrustes(a.astype(float), b.astype(float))
    except ValueError as error:
        raise GeometryError(f"zero-norm shape ({error})") from error
    return float(min(max(disparity, 0.0), 1.0))


def grid_symmetries(bits: np.ndarray) -> list[np.ndarray]:
    """Images of a grid under the dihedral symmetries that keep its shape."""
    images = [bits, bits[::-1, ::-1], bits[::-1], bits[:, ::-1]]
    if bits.shape[0] == bits.shape[1]:
        images += [bits.T, bits.T[::-1], bits.T[:, ::-1], bits.T[::-1, ::-1]]
    return images


def procrustes_disparity(a: ShapeMask, b: ShapeMask, *, orientation_invariant: bool = False) -> float:
    """
    Matrix Procrustes disparity between two masks.

    Each mask is read as `height` points in `width` dimensions. Both are centered and scaled
    to unit Frobenius norm, `b` is aligned to `a` by the optimal orthogonal transform
    (reflections allowed) and uniform scale, and the residual sum of squares is returned.

    Parameters
    ----------
    - a, b: masks of identical width and height
    - orientation_invariant: minimise over the dihedral grid symmetries of both masks

    Returns
    -------
    - disparity in [0, 1]; 0 for identical shapes
    """
    a.require_same_shape(b)
    if a.count == 0 or b.count == 0:
        raise GeometryError("zero-norm shape: mask has no foreground")
    if not orientation_invariant:
        return _matrix_disparity(a.bits, b.bits)
    # a transposed image can be zero-norm when the original is not
    disparities = []
    for x, y in product(grid_symmetries(a.bits), grid_symmetries(b.bits)):
        try:
            disparities.append(_matrix_disparity(x, y))
        except GeometryError:
            continue
    if not disparities:
        raise GeometryError("zero-norm shape in every orientation")
    return min(disparities)
