"""On-disk formats: binary PGM/PPM images, flat CSV datasets, and the
numeric artifact files (losses, diagrams, Betti curves, persistence images).

All floating-point output is printed with 15 significant digits, enough for
exact float64 round-trips in practice and stable across platforms.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .datatypes import Image, LabeledDataset
from .errors import DatasetError, InconsistentDimensionsError
from .persistence import KAPPA_GRID, BettiCurve, DiagramPoint, betti_curve


def fmt(x: float) -> str:
    return f"{float(x):.15g}"


def quantize_byte(v: float) -> int:
    """Round half up onto the 0..255 scale."""
    return int(min(255, max(0, int(np.floor(v * 255.0 + 0.5)))))


def write_image(path: str, img: Image) -> None:
    """PGM (P5) for single-channel, PPM (P6) for 3-channel, maxval 255."""
    if img.channels == 1:
        magic = b"P5"
        flat = img.pixels[:, :, 0]
    elif img.channels == 3:
        magic = b"P6"
        flat = img.pixels
    else:
        raise DatasetError(f"cannot export {img.channels}-channel image as PGM/PPM")
    data = np.floor(flat * 255.0 + 0.5).clip(0, 255).astype(np.uint8)
    header = magic + f"\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def _read_pnm_tokens(blob: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated ASCII integers, skipping # comments.

    Returns the values and the offset one byte past the final separator.
    """
    values: list[int] = []
    i = 0
    while len(values) < count:
        if i >= len(blob):
            raise DatasetError("truncated image header")
        ch = blob[i:i + 1]
        if ch == b"#":
            while i < len(blob) and blob[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(blob) and not blob[j:j + 1].isspace() and blob[j:j + 1] != b"#":
                j += 1
            token = blob[i:j]
            if not token.isdigit():
                raise DatasetError(f"bad header token {token!r}")
            values.append(int(token))
            i = j
    # exactly one whitespace byte separates the header from pixel data
    if i >= len(blob) or not blob[i:i + 1].isspace():
        raise DatasetError("missing separator after image header")
    return values, i + 1


def read_image(path: str) -> Image:
    with open(path, "rb") as fh:
        blob = fh.read()
    magic = blob[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise DatasetError(f"{path}: not a binary PGM/PPM file")
    (width, height, maxval), offset = _read_pnm_tokens(blob[2:], 3)
    offset += 2
    if maxval != 255:
        raise DatasetError(f"{path}: only maxval 255 is supported, got {maxval}")
    expected = width * height * channels
    raw = blob[offset:offset + expected]
    if len(raw) != expected:
        raise DatasetError(f"{path}: expected {expected} pixel bytes, got {len(raw)}")
    arr = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
    return Image(arr.reshape(height, width, channels))


def write_dataset_csv(path: str, data: LabeledDataset) -> None:
    """Flat format: a shape comment, a header, then one row per image."""
    h, w, c = data.image_shape()
    pixel_count = h * w * c
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# height={h} width={w} channels={c}\n")
        fh.write("label," + ",".join(f"p{i}" for i in range(pixel_count)) + "\n")
        for img, label in zip(data.images, data.labels):
            row = ",".join(fmt(v) for v in img.flatten())
            fh.write(f"{label},{row}\n")


def read_dataset_csv(path: str) -> LabeledDataset:
    shape = None
    images: list[Image] = []
    labels: list[int] = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = dict(part.split("=") for part in line[1:].split() if "=" in part)
                if {"height", "width", "channels"} <= set(fields):
                    shape = (int(fields["height"]), int(fields["width"]),
                             int(fields["channels"]))
                continue
            if line.startswith("label,"):
                continue
            cells = line.split(",")
            labels.append(int(cells[0]))
            images.append(np.array([float(v) for v in cells[1:]]))
    if not images:
        raise DatasetError(f"{path}: no data rows")
    pixel_count = len(images[0])
    if any(len(row) != pixel_count for row in images):
        raise InconsistentDimensionsError(f"{path}: rows have differing pixel counts")
    if shape is None:
        side = int(round(np.sqrt(pixel_count)))
        if side * side != pixel_count:
            raise DatasetError(
                f"{path}: cannot infer image shape from {pixel_count} pixels; "
                "add a '# height=H width=W channels=C' comment line")
        shape = (side, side, 1)
    if int(np.prod(shape)) != pixel_count:
        raise InconsistentDimensionsError(
            f"{path}: declared shape {shape} does not match {pixel_count} pixels")
    imgs = [Image(row.reshape(shape)) for row in images]
    return LabeledDataset(images=imgs, labels=labels, class_count=max(labels) + 1)


def ingest_dataset(path: str) -> LabeledDataset:
    """Directory of class subfolders with PGM/PPM files, or a flat CSV."""
    if os.path.isfile(path):
        return read_dataset_csv(path)
    if not os.path.isdir(path):
        raise DatasetError(f"{path}: no such file or directory")
    class_dirs = sorted(d for d in os.listdir(path)
                        if os.path.isdir(os.path.join(path, d)))
    if not class_dirs:
        raise DatasetError(f"{path}: no class subfolders")
    images: list[Image] = []
    labels: list[int] = []
    shape = None
    for class_id, name in enumerate(class_dirs):
        folder = os.path.join(path, name)
        files = sorted(f for f in os.listdir(folder)
                       if f.endswith((".pgm", ".ppm")))
        if not files:
            raise DatasetError(f"{folder}: class folder has no PGM/PPM images")
        for fname in files:
            img = read_image(os.path.join(folder, fname))
            if shape is None:
                shape = img.shape
            elif img.shape != shape:
                raise InconsistentDimensionsError(
                    f"{fname}: shape {img.shape} differs from {shape}")
            images.append(img)
            labels.append(class_id)
    return LabeledDataset(images=images, labels=labels, class_count=len(class_dirs))


def read_pointcloud_csv(path: str) -> np.ndarray:
    """Plain numeric CSV, one point per row; # comments and headers skipped."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            try:
                rows.append([float(v) for v in cells])
            except ValueError:
                continue  # header line
    if not rows:
        raise DatasetError(f"{path}: no numeric rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DatasetError(f"{path}: rows have differing column counts")
    return np.array(rows)


def write_edges_csv(path: str, graph) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("u,v,weight\n")
        for u, v, w in sorted(graph.edges, key=lambda e: (e[2], e[0], e[1])):
            fh.write(f"{u},{v},{fmt(w)}\n")


def write_diagram_csv(path: str, dgms: tuple[list[DiagramPoint], list[DiagramPoint]]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("degree,birth,death,capped\n")
        for dgm in dgms:
            for pt in dgm:
                fh.write(f"{pt.degree},{fmt(pt.birth)},{fmt(pt.death)},"
                         f"{int(pt.capped)}\n")


def write_betti_csv(path: str, curve0: BettiCurve, curve1: BettiCurve) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("epsilon,b0,b1\n")
        for eps, b0, b1 in zip(curve0.epsilons, curve0.counts, curve1.counts):
            fh.write(f"{fmt(eps)},{b0},{b1}\n")


def write_pi_csv(path: str, pi) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("cell_index,value\n")
        for m, value in enumerate(pi.cells):
            fh.write(f"{m},{fmt(value)}\n")
    sidecar = {"degree": pi.degree, "grid_side": pi.grid_side,
               "sigma_pi": pi.sigma_pi, "eps_max": pi.eps_max}
    with open(os.path.splitext(path)[0] + ".json", "w", encoding="ascii") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_losses_csv(path: str, step_losses) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("step,sup,align,topo,total\n")
        for t in step_losses:
            fh.write(f"{t.step},{fmt(t.sup_loss)},{fmt(t.align_loss)},"
                     f"{fmt(t.topo_loss)},{fmt(t.total)}\n")


def emit_outputs(syn, diag, out_dir: str, manifest_text: str | None = None) -> list[str]:
    """Write the full artifact set for a finished run; returns the file list."""
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    def track(name: str) -> str:
        written.append(name)
        return os.path.join(out_dir, name)

    ext = "pgm" if syn.images[0].channels == 1 else "ppm"
    for class_id in range(syn.class_count):
        block = syn.class_slice(class_id)
        for slot, j in enumerate(range(block.start, block.stop)):
            write_image(track(f"syn_c{class_id}_{slot:03d}.{ext}"), syn.images[j])

    with open(track("diagnostics.json"), "w", encoding="ascii") as fh:
        json.dump(diag.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_losses_csv(track("losses.csv"), diag.step_losses)

    if diag.final_topology is not None:
        for class_id, topo in enumerate(diag.final_topology):
            write_diagram_csv(track(f"diagram_{class_id}.csv"), topo.syn_dgms)
            curve0 = betti_curve(topo.syn_dgms[0], topo.eps_max, KAPPA_GRID, degree=0)
            curve1 = betti_curve(topo.syn_dgms[1], topo.eps_max, KAPPA_GRID, degree=1)
            write_betti_csv(track(f"betti_{class_id}.csv"), curve0, curve1)
            write_pi_csv(track(f"pi_{class_id}0.csv"), topo.syn_pis[0])
            written.append(f"pi_{class_id}0.json")
            write_pi_csv(track(f"pi_{class_id}1.csv"), topo.syn_pis[1])
            written.append(f"pi_{class_id}1.json")

    if manifest_text is not None:
        with open(track("manifest.json"), "w", encoding="ascii") as fh:
            fh.write(manifest_text)
    return sorted(written)
