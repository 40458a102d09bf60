"""Location fix geometry: haversine distances, stay detection, greedy stay clustering."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

EARTH_RADIUS_M = 6_371_000.0


def haversine(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True)
class Fix:
    t: float  # seconds
    lat: float
    lon: float
    speed: float | None = None


@dataclass(frozen=True)
class Stay:
    first: int  # index of first member fix
    last: int  # index of last member fix (inclusive)
    lat: float
    lon: float
    duration: float


@dataclass(frozen=True)
class StayCluster:
    lat: float
    lon: float
    members: tuple[int, ...]  # fix indices
    duration: float  # total stay seconds
    visits: int


def detect_stays(fixes: Sequence[Fix], radius_m: float, min_stay_s: float) -> list[Stay]:
    """Runs of consecutive fixes within ``radius_m`` of the run's first fix that last
    at least ``min_stay_s``. Runs are non-overlapping."""
    stays: list[Stay] = []
    n = len(fixes)
    i = 0
    while i < n:
        anchor = fixes[i]
        j = i + 1
        while j < n and haversine(anchor.lat, anchor.lon, fixes[j].lat, fixes[j].lon) <= radius_m:
            j += 1
        duration = fixes[j - 1].t - anchor.t
        if j - 1 > i and duration >= min_stay_s:
            members = fixes[i:j]
            stays.append(
                Stay(
                    i,
                    j - 1,
                    sum(f.lat for f in members) / len(members),
                    sum(f.lon for f in members) / len(members),
                    duration,
                )
            )
            i = j
        else:
            i += 1
    return stays


def cluster_stays(fixes: Sequence[Fix], stays: Sequence[Stay], radius_m: float) -> list[StayCluster]:
    """Greedy assignment of stays, in time order, to the nearest cluster whose centroid
    lies within ``radius_m``; otherwise a new cluster is opened. Centroids are the mean
    of member fixes and are updated after each assignment."""
    members: list[list[int]] = []
    durations: list[float] = []
    visits: list[int] = []
    centroids: list[tuple[float, float]] = []
    for stay in stays:
        best, best_d = -1, math.inf
        for k, (clat, clon) in enumerate(centroids):
            d = haversine(stay.lat, stay.lon, clat, clon)
            if d <= radius_m and d < best_d:
                best, best_d = k, d
        idx = list(range(stay.first, stay.last + 1))
        if best < 0:
            members.append(idx)
            durations.append(stay.duration)
            visits.append(1)
            centroids.append((stay.lat, stay.lon))
            best = len(members) - 1
        else:
            members[best].extend(idx)
            durations[best] += stay.duration
            visits[best] += 1
        pts = members[best]
        centroids[best] = (
            sum(fixes[i].lat for i in pts) / len(pts),
            sum(fixes[i].lon for i in pts) / len(pts),
        )
    return [
        StayCluster(c[0], c[1], tuple(m), d, v)
        for c, m, d, v in zip(centroids, members, durations, visits)
    ]
