"""Deterministic construction of the bundled toy geo database.

Four city areas, each populated with a fixed set of named landmarks
(reference points for proximity queries) plus a seeded random scatter
of tagged points of interest. The bundled ``data/entities.txt`` and
``data/areas.txt`` files are exactly ``make_toy_db(seed=0)``.
"""

from __future__ import annotations

import numpy as np

from .geo import Box, Entity, GeoDb

CITY_BOXES = {
    "Paris": Box(48.75, 2.25, 48.95, 2.45),
    "Lyon": Box(45.70, 4.75, 45.85, 4.95),
    "Nice": Box(43.65, 7.20, 43.75, 7.32),
    "Lille": Box(50.58, 2.98, 50.68, 3.12),
}

# One of each per city, so center references resolve everywhere.
LANDMARKS = (
    ("CentralStation", ("railway", "station")),
    ("GrandHotel", ("tourism", "hotel")),
    ("CityMuseum", ("tourism", "museum")),
    ("MainCathedral", ("amenity", "place_of_worship")),
    ("OldMarket", ("shop", "supermarket")),
)

PRIMARY_TAGS = (
    ("tourism", "hotel"), ("tourism", "museum"), ("tourism", "attraction"),
    ("tourism", "viewpoint"), ("tourism", "guest_house"),
    ("amenity", "restaurant"), ("amenity", "bank"), ("amenity", "bar"),
    ("amenity", "cafe"), ("amenity", "pharmacy"), ("amenity", "parking"),
    ("amenity", "fuel"), ("amenity", "atm"), ("amenity", "library"),
    ("amenity", "cinema"), ("amenity", "police"), ("amenity", "post_office"),
    ("amenity", "fast_food"), ("amenity", "drinking_water"),
    ("shop", "bakery"), ("shop", "supermarket"), ("shop", "butcher"),
    ("shop", "clothes"), ("shop", "hairdresser"), ("shop", "convenience"),
    ("railway", "station"), ("highway", "bus_stop"),
    ("leisure", "park"), ("leisure", "playground"),
    ("historic", "monument"),
)

CUISINES = ("french", "italian", "japanese", "indian", "regional", "kebab")
HOURS = ("Mo-Su_08-20", "Mo-Fr_09-18", "Mo-Sa_07-19", "24-7")
ENTITIES_PER_CITY = 55


def _point_in(box: Box, rng) -> tuple[float, float]:
    lat = rng.uniform(box.south, box.north)
    lon = rng.uniform(box.west, box.east)
    return round(lat, 6), round(lon, 6)


def make_toy_db(seed: int = 0) -> GeoDb:
    rng = np.random.default_rng(seed)
    entities = []
    next_id = 1
    for city in sorted(CITY_BOXES):
        box = CITY_BOXES[city]
        for name, (key, value) in LANDMARKS:
            lat, lon = _point_in(box, rng)
            entities.append(
                Entity(next_id, lat, lon, ((key, value), ("name", name)))
            )
            next_id += 1
        for _ in range(ENTITIES_PER_CITY):
            lat, lon = _point_in(box, rng)
            key, value = PRIMARY_TAGS[rng.integers(len(PRIMARY_TAGS))]
            tags = [(key, value)]
            if rng.random() < 0.35:
                tags.append(("name", f"{value.capitalize()}{next_id}"))
            if key == "amenity" and value in ("restaurant", "cafe", "fast_food"):
                tags.append(("cuisine", CUISINES[rng.integers(len(CUISINES))]))
            if rng.random() < 0.5:
                tags.append(("wheelchair", ("yes", "no", "limited")[rng.integers(3)]))
            if rng.random() < 0.3:
                tags.append(("website", f"place{next_id}.example.org"))
            if rng.random() < 0.3:
                tags.append(("phone", f"0033-{rng.integers(1, 10)}-{rng.integers(100000, 1000000)}"))
            if rng.random() < 0.4:
                tags.append(("opening_hours", HOURS[rng.integers(len(HOURS))]))
            entities.append(Entity(next_id, lat, lon, tuple(tags)))
            next_id += 1
    return GeoDb(entities, dict(CITY_BOXES))
