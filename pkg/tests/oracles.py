"""Brute-force reference implementations used as test oracles.

These are written independently of the package code: state rasters instead
of event state machines, explicit tallies instead of Counters, a different
haversine formulation, exhaustive split search. They are slow on purpose.
"""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

DAY_S = 86_400

# --- scale scoring -------------------------------------------------------------

_FLIP = {1: 4, 2: 3, 3: 2, 4: 1}


def uls8_total(items) -> int:
    # 0-based positions 2 and 5 are the positively worded items
    return sum(_FLIP[v] if pos in (2, 5) else v for pos, v in enumerate(items))


# --- generic helpers -----------------------------------------------------------


def pstd(xs) -> float:
    if len(xs) < 2:
        return 0.0
    return float(np.std(np.asarray(xs, dtype=float)))


def runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [a, b) runs of True in a boolean raster."""
    edges = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return [(int(a), int(b)) for a, b in zip(starts, stops)]


def hold(codes: np.ndarray) -> np.ndarray:
    """Forward-fill a per-second code raster; -1 marks seconds without an event."""
    pos = np.where(codes >= 0, np.arange(len(codes)), 0)
    pos = np.maximum.accumulate(pos)
    out = codes[pos]
    out[: np.argmax(codes >= 0) if (codes >= 0).any() else len(codes)] = -1
    return out


# --- screen --------------------------------------------------------------------


def screen(events: list[tuple[int, str]]) -> dict:
    """``events``: (second of day, transition) with distinct seconds."""
    codes = np.full(DAY_S, -1, dtype=np.int8)
    for s, tr in events:
        if tr == "unlock":
            codes[s] = 1
        elif tr in ("lock", "off"):
            codes[s] = 0
    eps = runs(hold(codes) == 1)
    if not eps:
        return {}
    durs = [float(b - a) for a, b in eps]
    gaps = [float(eps[k + 1][0] - eps[k][1]) for k in range(len(eps) - 1)]
    return {
        "unlock_episode_count": float(len(eps)),
        "unlock_duration_total": sum(durs),
        "unlock_duration_avg": sum(durs) / len(durs),
        "unlock_duration_min": min(durs),
        "unlock_duration_max": max(durs),
        "unlock_duration_std": pstd(durs),
        "first_unlock_after_midnight": eps[0][0] / 60.0,
        "last_unlock_time": eps[-1][0] / 60.0,
        "time_between_unlocks_avg": sum(gaps) / len(gaps) if gaps else 0.0,
        "time_between_unlocks_max": max(gaps) if gaps else 0.0,
    }


# --- battery -------------------------------------------------------------------


def battery(events: list[tuple[int, float, str]]) -> dict:
    """``events``: (second of day, level, status) with distinct seconds."""
    codes = np.full(DAY_S, -1, dtype=np.int8)  # 1 charging, 0 discharging
    for s, _, st in events:
        codes[s] = 0 if st == "discharging" else 1
    state = hold(codes)
    charge, discharge = [], []
    for a, b in runs(state == 1):
        charge.append(float(b - a))
    for a, b in runs(state == 0):
        discharge.append(float(b - a))
    levels = [lv for _, lv, _ in events]
    return {
        "charge_episode_count": float(len(charge)),
        "charge_duration_total": sum(charge),
        "charge_duration_avg": sum(charge) / len(charge) if charge else 0.0,
        "discharge_episode_count": float(len(discharge)),
        "discharge_duration_total": sum(discharge),
        "discharge_duration_avg": sum(discharge) / len(discharge) if discharge else 0.0,
        "battery_level_min": min(levels),
        "battery_level_max": max(levels),
    }


# --- keyboard ------------------------------------------------------------------


def keyboard(events: list[tuple[int, int]], gap_ms: float) -> dict:
    """``events``: (timestamp ms, text delta), time-ordered."""
    ts = [t for t, _ in events]
    session_of = []
    sid = 0
    for i in range(len(ts)):
        if i > 0 and ts[i] - ts[i - 1] > gap_ms:
            sid += 1
        session_of.append(sid)
    members = defaultdict(list)
    for t, s in zip(ts, session_of):
        members[s].append(t)
    lengths = [(max(v) - min(v)) / 1000.0 for v in members.values()]
    inner = [ts[i] - ts[i - 1] for i in range(1, len(ts)) if session_of[i] == session_of[i - 1]]
    return {
        "key_press_count": float(len(ts)),
        "text_length_net_change": float(sum(d for _, d in events)),
        "text_length_abs_change": float(sum(abs(d) for _, d in events)),
        "typing_session_count": float(len(members)),
        "typing_session_length_avg": sum(lengths) / len(lengths),
        "typing_session_length_max": max(lengths),
        "inter_key_delay_avg": sum(inner) / len(inner) if inner else 0.0,
    }


# --- calls and messages ---------------------------------------------------------


def calls(events: list[tuple[str, float, str]]) -> dict:
    def pick(d):
        return [e for e in events if e[0] == d]

    inc, out, missed = pick("incoming"), pick("outgoing"), pick("missed")
    connected = inc + out
    contacts = sorted({c for _, _, c in events})
    per_contact = [sum(1 for e in events if e[2] == c) for c in contacts]
    return {
        "call_incoming_count": float(len(inc)),
        "call_outgoing_count": float(len(out)),
        "call_missed_count": float(len(missed)),
        "call_incoming_duration": float(sum(d for _, d, _ in inc)),
        "call_outgoing_duration": float(sum(d for _, d, _ in out)),
        "call_duration_total": float(sum(d for _, d, _ in events)),
        "call_duration_avg": sum(d for _, d, _ in connected) / len(connected) if connected else 0.0,
        "call_duration_max": max(d for _, d, _ in events),
        "call_distinct_contacts": float(len(contacts)),
        "call_top_contact_count": float(max(per_contact)),
    }


def messages(events: list[tuple[str, str]]) -> dict:
    contacts = sorted({c for _, c in events})
    best = None
    for c in contacts:  # ascending, so the first maximum is the smallest token
        n = sum(1 for _, x in events if x == c)
        if best is None or n > best[1]:
            best = (c, n)
    top = best[0]
    return {
        "message_sent_count": float(sum(1 for d, _ in events if d == "sent")),
        "message_received_count": float(sum(1 for d, _ in events if d == "received")),
        "message_distinct_contacts": float(len(contacts)),
        "message_top_contact_count": float(best[1]),
        "message_top_contact_sent": float(sum(1 for d, c in events if c == top and d == "sent")),
        "message_top_contact_received": float(sum(1 for d, c in events if c == top and d == "received")),
    }


# --- applications ----------------------------------------------------------------


def covered_ms(intervals: list[tuple[int, int]]) -> int:
    """Sum of elementary segments between all endpoints that some interval covers."""
    cuts = sorted({x for iv in intervals for x in iv})
    return sum(b - a for a, b in zip(cuts, cuts[1:]) if any(s <= a and b <= e for s, e in intervals))


def applications(events: list[tuple[str, int, int]], day_start: int, day_end: int, category_of, categories) -> dict:
    vals = {"app_usage_duration_total": 0.0, "app_usage_episode_count": 0.0, "app_usage_episode_avg": 0.0}
    for c in categories:
        vals[f"app_{c}_duration"] = 0.0
        vals[f"app_{c}_episode_count"] = 0.0
    by_cat: dict[str, list] = {c: [] for c in categories}
    clipped = 0.0
    for pkg, a, b in events:
        iv = (max(a, day_start), min(b, day_end))
        c = category_of(pkg)
        vals[f"app_{c}_episode_count"] += 1
        if iv[1] > iv[0]:
            by_cat[c].append(iv)
            clipped += (iv[1] - iv[0]) / 1000.0
    for c, ivs in by_cat.items():
        vals[f"app_{c}_duration"] = covered_ms(ivs) / 1000.0
    vals["app_usage_duration_total"] = covered_ms([iv for ivs in by_cat.values() for iv in ivs]) / 1000.0
    vals["app_usage_episode_count"] = float(len(events))
    vals["app_usage_episode_avg"] = clipped / len(events)
    return vals


# --- locations ---------------------------------------------------------------------

R_EARTH = 6_371_000.0


def gc_distance(lat1, lon1, lat2, lon2) -> float:
    """atan2 form of the great-circle distance."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    h = math.sin((phi2 - phi1) / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(math.radians(lon2 - lon1) / 2) ** 2
    h = min(1.0, max(0.0, h))
    return 2 * R_EARTH * math.atan2(math.sqrt(h), math.sqrt(1 - h))


def locations(fixes: list[tuple[float, float, float, float | None]], radius: float, min_stay: float, speed_thr: float) -> dict:
    """``fixes``: (seconds, lat, lon, speed or None), time-ordered."""
    n = len(fixes)
    seg = []
    for k in range(n - 1):
        (t0, a0, o0, s0), (t1, a1, o1, _) = fixes[k], fixes[k + 1]
        d = gc_distance(a0, o0, a1, o1)
        dt = t1 - t0
        v = s0 if s0 is not None else (d / dt if dt > 0 else 0.0)
        seg.append((d, dt, v))
    moving = [(d, dt, v) for d, dt, v in seg if v > speed_thr]
    static = [(d, dt, v) for d, dt, v in seg if not v > speed_thr]
    mt = sum(dt for _, dt, _ in moving)
    st = sum(dt for _, dt, _ in static)

    clat = sum(f[1] for f in fixes) / n
    clon = sum(f[2] for f in fixes) / n
    gyr = math.sqrt(sum(gc_distance(f[1], f[2], clat, clon) ** 2 for f in fixes) / n)

    # stays: from each anchor, the longest prefix wholly inside the radius
    stays = []
    i = 0
    while i < n:
        last = i
        d_i = [gc_distance(fixes[i][1], fixes[i][2], f[1], f[2]) for f in fixes]
        for j in range(i + 1, n):
            if all(d_i[k] <= radius for k in range(i + 1, j + 1)):
                last = j
            else:
                break
        if last > i and fixes[last][0] - fixes[i][0] >= min_stay:
            stays.append((i, last))
            i = last + 1
        else:
            i += 1

    # clusters: recompute every centroid from its member list each time
    clusters: list[dict] = []
    for a, b in stays:
        slat = sum(fixes[k][1] for k in range(a, b + 1)) / (b - a + 1)
        slon = sum(fixes[k][2] for k in range(a, b + 1)) / (b - a + 1)
        cands = []
        for ci, c in enumerate(clusters):
            mlat = sum(fixes[k][1] for k in c["m"]) / len(c["m"])
            mlon = sum(fixes[k][2] for k in c["m"]) / len(c["m"])
            d = gc_distance(slat, slon, mlat, mlon)
            if d <= radius:
                cands.append((d, ci))
        dur = fixes[b][0] - fixes[a][0]
        if cands:
            _, ci = min(cands)
            clusters[ci]["m"] += list(range(a, b + 1))
            clusters[ci]["d"] += dur
        else:
            clusters.append({"m": list(range(a, b + 1)), "d": dur})
    lengths = [c["d"] for c in clusters]
    tot = sum(lengths)
    ent = -sum((x / tot) * math.log(x / tot) for x in lengths if x > 0) if tot > 0 else 0.0
    return {
        "average_speed": sum(v * dt for _, dt, v in moving) / mt if mt > 0 else 0.0,
        "max_speed": max([v for _, _, v in seg] + [0.0]),
        "moving_time": mt,
        "static_time": st,
        "moving_to_static_ratio": mt / st if st > 0 else mt,
        "total_travel_distance": sum(d for d, _, _ in seg),
        "radius_of_gyration": gyr,
        "distinct_location_clusters": float(len(clusters)),
        "time_at_top_cluster": max(lengths) if lengths else 0.0,
        "stay_length_avg": tot / len(lengths) if lengths else 0.0,
        "stay_length_std": pstd(lengths),
        "location_entropy": ent,
    }


# --- regression split search --------------------------------------------------------


def best_split_gain(X: np.ndarray, y: np.ndarray, min_leaf: int) -> float:
    """Largest SSE reduction over every feature and every midpoint threshold."""
    n = len(y)
    parent = float(((y - y.mean()) ** 2).sum())
    best = 0.0
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = (lo + hi) / 2
            left = X[:, f] <= thr
            nl = int(left.sum())
            if nl < min_leaf or n - nl < min_leaf:
                continue
            yl, yr = y[left], y[~left]
            child = float(((yl - yl.mean()) ** 2).sum() + ((yr - yr.mean()) ** 2).sum())
            best = max(best, parent - child)
    return best
