"""Metrics comparing detected and true change points on a horizon [1, T]."""
from __future__ import annotations

import math
from typing import Iterable


def canonical(points: Iterable[int], T: int | None = None) -> list[int]:
    pts = sorted({int(p) for p in points})
    if T is not None and pts and (pts[0] <= 1 or pts[-1] > T):
        raise ValueError(f"change points must lie in (1, {T}], got {pts}")
    return pts


def abs_error(detected: Iterable[int], truth: Iterable[int]) -> int:
    return abs(len(canonical(detected)) - len(canonical(truth)))


def hausdorff_one_sided(a: Iterable[int], b: Iterable[int]) -> float:
    """max over c in b of the distance from c to the nearest point of a.

    With detected points C_hat and true points C, d(C_hat | C) is
    ``hausdorff_one_sided(C_hat, C)``. An empty ``a`` gives +inf and an
    empty ``b`` gives -inf (max over an empty set); both empty gives 0.
    """
    a, b = canonical(a), canonical(b)
    if not a and not b:
        return 0.0
    if not a:
        return math.inf
    if not b:
        return -math.inf
    return float(max(min(abs(x - c) for x in a) for c in b))


def partition(points: Iterable[int], T: int) -> list[range]:
    """Segments of 1..T starting at 1 and at every change point."""
    starts = [1] + [p for p in canonical(points, T) if p > 1]
    ends = [s - 1 for s in starts[1:]] + [T]
    return [range(s, e + 1) for s, e in zip(starts, ends)]


def covering(truth: Iterable[int], detected: Iterable[int], T: int) -> float:
    G = partition(truth, T)
    G_hat = partition(detected, T)
    total = 0.0
    for A in G:
        best = 0.0
        for B in G_hat:
            inter = max(0, min(A.stop, B.stop) - max(A.start, B.start))
            if inter == 0:
                continue
            union = len(A) + len(B) - inter
            best = max(best, inter / union)
        total += len(A) * best
    return total / T


def all_metrics(detected, truth, T: int) -> dict[str, float]:
    return {
        "abs_error": float(abs_error(detected, truth)),
        "d_det_true": hausdorff_one_sided(detected, truth),
        "d_true_det": hausdorff_one_sided(truth, detected),
        "covering": covering(truth, detected, T),
    }


def format_extended(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".10g")
