"""On-disk corpus layout.

A split directory holds ``NNNN_image.lwa1`` (float32, H x W x C),
``NNNN_gt.lwa1`` (uint32 labels), ``NNNN_seeds.csv`` (label,row,col) and
``manifest.csv`` (id, sigma_noise, rng_seed).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import lwa
from .grid import Image, SeedSet, Segmentation
from .synth import SynthConfig, generate, seed_oracle

MANIFEST = "manifest.csv"


@dataclass
class Item:
    id: str
    image: Image
    gt: Segmentation
    seeds: SeedSet
    sigma_noise: float

    def triple(self):
        return self.image, self.gt, self.seeds


def image_seed(seed: int, split: str, index: int) -> int:
    """Per-image generator seed, a pure function of run seed, split and index."""
    split_code = {"train": 1, "test": 2}.get(split, 3)
    return int(np.random.SeedSequence((seed, split_code, index)).generate_state(1)[0])


def write_seeds(path, seeds: SeedSet, width: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "row", "col"])
        for node, label in sorted(seeds, key=lambda s: s[1]):
            w.writerow([label, node // width, node % width])


def read_seeds(path, width: int) -> SeedSet:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return SeedSet(tuple((int(r["row"]) * width + int(r["col"]), int(r["label"])) for r in rows))


def write_item(directory: Path, item_id: str, image: Image, gt: Segmentation, seeds: SeedSet):
    lwa.save(directory / f"{item_id}_image.lwa1", image.to_array(), lwa.FLOAT32)
    lwa.save(directory / f"{item_id}_gt.lwa1", gt.labels.reshape(gt.graph.shape), lwa.UINT32)
    write_seeds(directory / f"{item_id}_seeds.csv", seeds, gt.graph.width)


def generate_split(directory, count: int, config: SynthConfig, seed: int, split: str) -> list[Path]:
    """Write ``count`` synthetic items and the manifest; returns every file written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    rows = []
    for i in range(count):
        item_id = f"{i:04d}"
        rs = image_seed(seed, split, i)
        cfg = SynthConfig(config.height, config.width, config.sigma_noise, config.sigma_process,
                          config.sigma_blur, rs)
        image, gt = generate(cfg)
        write_item(directory, item_id, image, gt, seed_oracle(gt))
        written += [directory / f"{item_id}_{s}" for s in ("image.lwa1", "gt.lwa1", "seeds.csv")]
        rows.append((item_id, repr(float(config.sigma_noise)), rs))
    with open(directory / MANIFEST, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "sigma_noise", "rng_seed"])
        w.writerows(rows)
    written.append(directory / MANIFEST)
    return written


def load_split(directory, limit: int | None = None) -> list[Item]:
    directory = Path(directory)
    manifest = directory / MANIFEST
    if not manifest.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {directory}")
    with open(manifest, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if limit is not None:
        rows = rows[:limit]
    items = []
    for row in rows:
        item_id = row["id"]
        arr = lwa.load(directory / f"{item_id}_image.lwa1").astype(np.float64)
        labels = lwa.load(directory / f"{item_id}_gt.lwa1")[:, :, 0].astype(np.int64)
        image = Image.from_array(arr)
        gt = Segmentation.from_array(labels)
        seeds = read_seeds(directory / f"{item_id}_seeds.csv", labels.shape[1])
        items.append(Item(item_id, image, gt, seeds, float(row["sigma_noise"])))
    return items
