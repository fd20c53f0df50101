#!/usr/bin/env python3
"""Regenerate the bundled city fixture (src/kadsim/data/*.csv).

Builds a deterministic ~40-city one-way ping matrix from great-circle
distances (fiber detour factor plus a hash-seeded jitter so the matrix is
not perfectly metric), a coordinates table, and node counts per city.
A few cities appear only in the coordinates/count files to exercise the
nearest-covered-city fallback.
"""

import csv
import hashlib
import math
from pathlib import Path

EARTH_RADIUS_KM = 6371.0
MS_PER_KM = 1.0 / 130.0   # effective one-way propagation incl. routing detours
BASE_MS = 2.0             # last-mile floor
JITTER = 0.12

# name, lat, lon, node slots (0 = coordinates only, no slots)
COVERED = [
    ("NewYork", 40.71, -74.01, 200), ("Ashburn", 39.04, -77.49, 280),
    ("Chicago", 41.88, -87.63, 90), ("Dallas", 32.78, -96.80, 80),
    ("Seattle", 47.61, -122.33, 70), ("LosAngeles", 34.05, -118.24, 90),
    ("SanFrancisco", 37.77, -122.42, 150), ("Miami", 25.76, -80.19, 60),
    ("Denver", 39.74, -104.99, 40), ("Atlanta", 33.75, -84.39, 60),
    ("Toronto", 43.65, -79.38, 70), ("Montreal", 45.50, -73.57, 40),
    ("MexicoCity", 19.43, -99.13, 20), ("SaoPaulo", -23.55, -46.63, 50),
    ("BuenosAires", -34.60, -58.38, 25), ("Santiago", -33.45, -70.67, 15),
    ("London", 51.51, -0.13, 180), ("Paris", 48.86, 2.35, 90),
    ("Frankfurt", 50.11, 8.68, 230), ("Amsterdam", 52.37, 4.90, 140),
    ("Madrid", 40.42, -3.70, 40), ("Milan", 45.46, 9.19, 40),
    ("Stockholm", 59.33, 18.07, 40), ("Helsinki", 60.17, 24.94, 70),
    ("Warsaw", 52.23, 21.01, 30), ("Moscow", 55.76, 37.62, 50),
    ("Istanbul", 41.01, 28.98, 25), ("Dubai", 25.20, 55.27, 30),
    ("Mumbai", 19.08, 72.88, 40), ("Bangalore", 12.97, 77.59, 35),
    ("Singapore", 1.35, 103.82, 110), ("HongKong", 22.32, 114.17, 60),
    ("Tokyo", 35.68, 139.65, 90), ("Seoul", 37.57, 126.98, 50),
    ("Shanghai", 31.23, 121.47, 30), ("Sydney", -33.87, 151.21, 45),
    ("Auckland", -36.85, 174.76, 15), ("Johannesburg", -26.20, 28.05, 20),
    ("Cairo", 30.04, 31.24, 15), ("Lagos", 6.52, 3.38, 10),
]
# in the coordinate/count files but not in the ping matrix
UNCOVERED = [
    ("Newark", 40.74, -74.17, 25),
    ("Munich", 48.14, 11.58, 35),
    ("Osaka", 34.69, 135.50, 22),
]


def haversine_km(a, b):
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


def jitter(a, b):
    key = "|".join(sorted((a, b))).encode()
    h = int.from_bytes(hashlib.sha256(key).digest()[:4], "big")
    return 1.0 + JITTER * (h / 0xFFFFFFFF * 2.0 - 1.0)


def main():
    out = Path(__file__).resolve().parent.parent / "src" / "kadsim" / "data"
    out.mkdir(parents=True, exist_ok=True)
    names = [c[0] for c in COVERED]
    coords = {c[0]: (c[1], c[2]) for c in COVERED + UNCOVERED}

    with open(out / "cities.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["city", "lat", "lon"])
        for name in sorted(coords):
            w.writerow([name, f"{coords[name][0]:.2f}", f"{coords[name][1]:.2f}"])

    with open(out / "pings.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["city"] + names)
        for a in names:
            row = [a]
            for b in names:
                if a == b:
                    row.append("0")
                else:
                    ms = BASE_MS + haversine_km(coords[a], coords[b]) * MS_PER_KM * jitter(a, b)
                    row.append(f"{ms:.2f}")
            w.writerow(row)

    with open(out / "node_cities.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["city", "count"])
        for name, _, _, slots in COVERED + UNCOVERED:
            if slots:
                w.writerow([name, slots])

    total = sum(c[3] for c in COVERED + UNCOVERED)
    assert total >= 2048, total
    print(f"wrote {len(coords)} cities, {len(names)} covered, {total} node slots -> {out}")


if __name__ == "__main__":
    main()
