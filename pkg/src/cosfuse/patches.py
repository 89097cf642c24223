"""Sliding-window patch extraction and overlap-add reconstruction.

A grid describes where n-by-n windows sit on an image: windows step by
``n - overlap`` pixels and the final window on each axis is clamped to the
image edge when the stride does not tile the dimension exactly. Overlap-add
averages every patch contribution per pixel, so extract followed by
overlap-add is the identity.

Images are 2-d float64 arrays indexed [row, col]; patch data is the window
flattened row-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PatchGrid", "Patch", "build_grid", "extract", "overlap_add",
           "extract_matrix", "overlap_add_matrix", "cover_counts"]


@dataclass(frozen=True)
class PatchGrid:
    """Geometry of a sliding-window decomposition of one image."""

    patch_size: int
    overlap: int
    stride: int
    grid_rows: int
    grid_cols: int
    row_offsets: tuple
    col_offsets: tuple
    image_width: int
    image_height: int

    @property
    def cell_count(self):
        return self.grid_rows * self.grid_cols

    @property
    def patch_dim(self):
        return self.patch_size * self.patch_size


@dataclass(frozen=True)
class Patch:
    grid_row: int
    grid_col: int
    data: np.ndarray


def _axis_offsets(dim, n, stride):
    offsets = list(range(0, dim - n + 1, stride))
    if offsets[-1] != dim - n:
        offsets.append(dim - n)
    return tuple(offsets)


def build_grid(width, height, n, p):
    """Build the patch grid for a width-by-height image.

    ``n`` is the patch side, ``p`` the overlap between neighbouring patches
    (stride is n - p). Requires n <= min(width, height) and 0 <= p < n.
    """
    if n <= 0:
        raise ValueError(f"patch size must be positive, got {n}")
    if n > min(width, height):
        raise ValueError(
            f"patch size {n} exceeds image dimensions {width}x{height}"
        )
    if not 0 <= p < n:
        raise ValueError(f"overlap must satisfy 0 <= p < n, got p={p}, n={n}")
    stride = n - p
    row_offsets = _axis_offsets(height, n, stride)
    col_offsets = _axis_offsets(width, n, stride)
    return PatchGrid(
        patch_size=n,
        overlap=p,
        stride=stride,
        grid_rows=len(row_offsets),
        grid_cols=len(col_offsets),
        row_offsets=row_offsets,
        col_offsets=col_offsets,
        image_width=width,
        image_height=height,
    )


def _check_image(image, grid):
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (grid.image_height, grid.image_width):
        raise ValueError(
            f"image shape {image.shape} does not match grid "
            f"({grid.image_height}, {grid.image_width})"
        )
    return image


def extract_matrix(image, grid):
    """Extract all patches as the columns of a (n*n, cells) matrix.

    Columns are ordered row-major over grid cells; each column is the window
    flattened row-major.
    """
    image = _check_image(image, grid)
    n = grid.patch_size
    windows = np.lib.stride_tricks.sliding_window_view(image, (n, n))
    rows = np.asarray(grid.row_offsets)
    cols = np.asarray(grid.col_offsets)
    blocks = windows[rows][:, cols]  # (grid_rows, grid_cols, n, n)
    return blocks.reshape(grid.cell_count, grid.patch_dim).T.copy()


def cover_counts(grid):
    """Per-pixel patch cover counts implied by the grid geometry."""
    counts = np.zeros((grid.image_height, grid.image_width))
    n = grid.patch_size
    for r in grid.row_offsets:
        for c in grid.col_offsets:
            counts[r:r + n, c:c + n] += 1.0
    return counts


def overlap_add_matrix(P, grid):
    """Reassemble an image from a (n*n, cells) patch matrix by averaging."""
    P = np.asarray(P, dtype=np.float64)
    if P.shape != (grid.patch_dim, grid.cell_count):
        raise ValueError(
            f"patch matrix shape {P.shape} does not match grid "
            f"({grid.patch_dim}, {grid.cell_count})"
        )
    n = grid.patch_size
    accum = np.zeros((grid.image_height, grid.image_width))
    cell = 0
    for r in grid.row_offsets:
        for c in grid.col_offsets:
            accum[r:r + n, c:c + n] += P[:, cell].reshape(n, n)
            cell += 1
    return accum / cover_counts(grid)


def extract(image, grid):
    """Extract all patches as Patch objects in row-major grid order."""
    P = extract_matrix(image, grid)
    out = []
    cell = 0
    for i in range(grid.grid_rows):
        for j in range(grid.grid_cols):
            out.append(Patch(grid_row=i, grid_col=j, data=P[:, cell].copy()))
            cell += 1
    return out


def overlap_add(patches, grid):
    """Reassemble an image from a complete list of patches.

    Every grid cell must appear exactly once; patch order does not matter.
    """
    P = np.zeros((grid.patch_dim, grid.cell_count))
    seen = np.zeros(grid.cell_count, dtype=bool)
    for patch in patches:
        if not (0 <= patch.grid_row < grid.grid_rows
                and 0 <= patch.grid_col < grid.grid_cols):
            raise ValueError(
                f"patch cell ({patch.grid_row}, {patch.grid_col}) outside grid"
            )
        cell = patch.grid_row * grid.grid_cols + patch.grid_col
        if seen[cell]:
            raise ValueError(
                f"duplicate patch for cell ({patch.grid_row}, {patch.grid_col})"
            )
        data = np.asarray(patch.data, dtype=np.float64)
        if data.shape != (grid.patch_dim,):
            raise ValueError(
                f"patch data length {data.size} != {grid.patch_dim}"
            )
        P[:, cell] = data
        seen[cell] = True
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise ValueError(
            f"incomplete patch list: cell "
            f"({missing // grid.grid_cols}, {missing % grid.grid_cols}) missing"
        )
    return overlap_add_matrix(P, grid)
