"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from spectralweak.dataset import Bag, Dataset, Instance


def build_dataset(bags, strong):
    """bags: iterable of (bag_id, label, rows) with rows a list of feature lists."""
    instances = []
    bag_objs = []
    counter = 0
    for bag_id, label, rows in bags:
        members = []
        for row in rows:
            iid = f"i{counter:03d}"
            counter += 1
            instances.append(Instance(id=iid, features=np.asarray(row, dtype=float)))
            members.append(iid)
        bag_objs.append(Bag(id=bag_id, label=label, members=tuple(members)))
    return Dataset(instances=tuple(instances), bags=tuple(bag_objs), strong_label=strong)


def singleton_dataset(points, labels, strong=None):
    """One bag per instance, labelled by the instance's class."""
    rows = np.asarray(points, dtype=float)
    labs = [str(v) for v in labels]
    bags = [(f"b{i:03d}", labs[i], [rows[i]]) for i in range(len(labs))]
    return build_dataset(bags, strong if strong is not None else sorted(set(labs))[0])


def two_blobs(n_per=6, gap=8.0, spread=0.3, seed=0):
    """Two well-separated point clouds plus their group labels."""
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, spread, size=(n_per, 2))
    b = rng.normal(0.0, spread, size=(n_per, 2)) + [gap, 0.0]
    return np.vstack([a, b]), np.array([0] * n_per + [1] * n_per)
