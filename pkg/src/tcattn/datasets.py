"""Synthetic sequence datasets and CSV/JSON-manifest ingestion.

Generators:

* ``interpolation`` - multi-sine signals with a zeroed hole to fill in,
* ``extrapolation`` - a prefix of the same kind of signal and its continuation,
* ``keyframe`` - a shuffled sequence of class prototypes; reconstruct one of them,
* ``actions`` - noise with one class-specific motif, variable length, zero padded.

Class prototypes/motifs depend only on ``prototype_seed`` so that datasets
generated with different sampling seeds share the same classes.
"""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .tensor import Rng


class DatasetError(ValueError):
    """Problem with dataset contents; carries the offending file and line."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}" + (f":{line}" if line is not None else "") + ": "
        super().__init__(where + message)


class MissingFileError(DatasetError):
    pass


class RaggedRowError(DatasetError):
    pass


class NonNumericError(DatasetError):
    pass


@dataclass
class SequenceDataset:
    task: str
    inputs: list
    masks: list
    targets: list = None
    labels: list = None
    truths: list = field(default_factory=list)
    generator: dict = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.inputs)
        if len(self.masks) != k:
            raise DatasetError("inputs and masks differ in length")
        if (self.targets is None) == (self.labels is None):
            raise DatasetError("exactly one of targets or labels must be given")
        if len(self.targets if self.targets is not None else self.labels) != k:
            raise DatasetError("inputs and targets/labels differ in length")
        if not self.truths:
            self.truths = [{} for _ in range(k)]
        shapes = {x.shape for x in self.inputs}
        if len(shapes) > 1:
            raise DatasetError(f"inputs have differing shapes {sorted(shapes)}")

    def __len__(self):
        return len(self.inputs)

    @property
    def kind(self):
        return "classifier" if self.labels is not None else "autoencoder"

    @property
    def n(self):
        return self.inputs[0].shape[0]

    @property
    def f(self):
        return self.inputs[0].shape[1]

    @property
    def m(self):
        return 1 if self.labels is not None else self.targets[0].shape[0]

    @property
    def num_classes(self):
        if self.labels is None:
            return 0
        return int(self.generator.get("classes", max(self.labels) + 1))

    def stacked(self, kind=None):
        """Return ``(X, target, mask)`` as arrays with a leading sequence axis."""
        kind = kind or self.kind
        if kind != self.kind:
            raise DatasetError(f"{self.task} dataset is for a {self.kind}, not a {kind}")
        X = np.stack(self.inputs)
        mask = np.stack(self.masks).astype(bool)
        target = np.asarray(self.labels, dtype=np.int64) if self.labels is not None else np.stack(self.targets)
        return X, target, mask

    def subset(self, idx):
        idx = [int(i) for i in idx]
        pick = lambda seq: None if seq is None else [seq[i] for i in idx]
        return SequenceDataset(
            self.task, pick(self.inputs), pick(self.masks), pick(self.targets), pick(self.labels),
            pick(self.truths), dict(self.generator),
        )

    def split(self, n_first):
        return self.subset(range(n_first)), self.subset(range(n_first, len(self)))


# ---------------------------------------------------------------- signals

def _sine_components(rng, f, min_period, max_period, amplitude):
    """Per channel: 2-4 (amp, freq, phase) triples whose amplitudes sum to `amplitude`."""
    comps = []
    for _ in range(f):
        k = int(rng.integers(2, 5))
        w = rng.uniform(0.2, 1.0, k)
        amps = amplitude * w / w.sum()
        freqs = 1.0 / rng.uniform(min_period, max_period, k)
        phases = rng.uniform(0.0, 2 * np.pi, k)
        comps.append([[float(a), float(fr), float(p)] for a, fr, p in zip(amps, freqs, phases)])
    return comps


def sine_signal(components, length, offset=0):
    """Evaluate noiseless components on frames ``offset .. offset+length-1`` (length x f)."""
    t = np.arange(offset, offset + length, dtype=np.float64)
    out = np.zeros((length, len(components)))
    for j, chan in enumerate(components):
        for amp, freq, phase in chan:
            out[:, j] += amp * np.sin(2 * np.pi * freq * t + phase)
    return out


def max_step_increment(components):
    """Upper bound on |x(t+1) - x(t)| for any channel of the noiseless signal."""
    return max(sum(a * 2 * np.pi * fr for a, fr, _ in chan) for chan in components)


def gen_interpolation(seed, count, n=160, hole_len=60, hole_start=50, f=8,
                      min_period=120.0, max_period=480.0, amplitude=0.9, noise=0.01):
    """Signals with frames ``[hole_start, hole_start + hole_len)`` zeroed in the input."""
    if hole_start < 0 or hole_len < 1 or hole_start + hole_len > n:
        raise ValueError(f"hole [{hole_start}, {hole_start + hole_len}) does not fit in {n} frames")
    rng = Rng(seed)
    inputs, targets, masks, truths = [], [], [], []
    for _ in range(count):
        comps = _sine_components(rng, f, min_period, max_period, amplitude)
        y = np.clip(sine_signal(comps, n) + rng.normal(0.0, noise, (n, f)), -1.0, 1.0)
        x = y.copy()
        x[hole_start:hole_start + hole_len] = 0.0
        inputs.append(x)
        targets.append(y)
        masks.append(np.ones(n, dtype=bool))
        truths.append({"hole_start": hole_start, "hole_end": hole_start + hole_len, "components": comps})
    gen = dict(task="interpolation", seed=seed, count=count, n=n, hole_len=hole_len, hole_start=hole_start,
               f=f, min_period=min_period, max_period=max_period, amplitude=amplitude, noise=noise)
    return SequenceDataset("interpolation", inputs, masks, targets=targets, truths=truths, generator=gen)


def gen_extrapolation(seed, count, prefix=50, horizon=60, f=8,
                      min_period=120.0, max_period=480.0, amplitude=0.9, noise=0.01):
    """First `prefix` frames as input, the next `horizon` frames as target."""
    if prefix < 1 or horizon < 1:
        raise ValueError("prefix and horizon must be >= 1")
    rng = Rng(seed)
    total = prefix + horizon
    inputs, targets, masks, truths = [], [], [], []
    for _ in range(count):
        comps = _sine_components(rng, f, min_period, max_period, amplitude)
        y = np.clip(sine_signal(comps, total) + rng.normal(0.0, noise, (total, f)), -1.0, 1.0)
        inputs.append(y[:prefix].copy())
        targets.append(y[prefix:].copy())
        masks.append(np.ones(prefix, dtype=bool))
        truths.append({"prefix": prefix, "components": comps})
    gen = dict(task="extrapolation", seed=seed, count=count, prefix=prefix, horizon=horizon, f=f,
               min_period=min_period, max_period=max_period, amplitude=amplitude, noise=noise)
    return SequenceDataset("extrapolation", inputs, masks, targets=targets, truths=truths, generator=gen)


def keyframe_basis(classes, f, prototype_seed=0, scale=1.0):
    """Class prototypes and a basis for within-class style.

    Returns ``(protos, style_basis)``: `protos` holds mutually orthogonal
    rows with per-entry RMS `scale`; `style_basis` (f - classes rows) is an
    orthonormal basis of their orthogonal complement.
    """
    if f < classes:
        raise ValueError(f"need f >= classes for orthogonal prototypes, got f={f}, classes={classes}")
    rng = Rng(prototype_seed)
    q, _ = np.linalg.qr(rng.normal(0.0, 1.0, (f, f)))
    return scale * np.sqrt(f) * q[:, :classes].T, q[:, classes:].T


def gen_keyframe(seed, count, frames=10, classes=10, f=32, target_class=2,
                 noise=0.05, style=0.3, style_dims=None, scale=1.0, prototype_seed=0):
    """Each sequence shows every class once in random order.

    A frame is its class prototype plus a per-instance style offset drawn in
    the complement of the prototype span (N(0, style) along each of
    `style_dims` basis directions, default all of them) plus observation noise N(0, noise). The target is the noiseless instance
    of `target_class` in that sequence (prototype + its style), so
    reconstructing it requires looking at the key frame.
    """
    if classes > frames:
        raise ValueError(f"cannot show {classes} distinct classes in {frames} frames")
    if not 0 <= target_class < classes:
        raise ValueError("target_class out of range")
    protos, basis = keyframe_basis(classes, f, prototype_seed, scale)
    if style_dims is not None:
        if not 0 <= style_dims <= len(basis):
            raise ValueError(f"style_dims must lie in [0, {len(basis)}]")
        basis = basis[:style_dims]
    rng = Rng(seed)
    inputs, targets, masks, truths = [], [], [], []
    for _ in range(count):
        order = rng.permutation(classes)
        if frames > classes:
            extra = rng.integers(0, classes, frames - classes)
            extra[extra == target_class] = (target_class + 1) % classes
            order = np.concatenate([order, extra])[rng.permutation(frames)]
        clean = protos[order] + rng.normal(0.0, style, (frames, len(basis))) @ basis
        x = clean + rng.normal(0.0, noise, (frames, f))
        key = int(np.flatnonzero(order == target_class)[0])
        inputs.append(x)
        targets.append(clean[key][None, :].copy())
        masks.append(np.ones(frames, dtype=bool))
        truths.append({"key_index": key, "order": [int(o) for o in order]})
    gen = dict(task="keyframe", seed=seed, count=count, frames=frames, classes=classes, f=f,
               target_class=target_class, noise=noise, style=style, style_dims=style_dims, scale=scale,
               prototype_seed=prototype_seed)
    return SequenceDataset("keyframe", inputs, masks, targets=targets, truths=truths, generator=gen)


def action_motifs(classes, motif_len, f, prototype_seed=0, amplitude=1.0):
    """One smooth, Hann-windowed multi-sine motif (motif_len x f) per class."""
    rng = Rng(prototype_seed)
    t = np.arange(motif_len) / motif_len
    window = np.sin(np.pi * (np.arange(motif_len) + 0.5) / motif_len) ** 2
    motifs = np.zeros((classes, motif_len, f))
    for c in range(classes):
        for j in range(f):
            cycles = rng.uniform(0.5, 2.0, 2)
            phases = rng.uniform(0.0, 2 * np.pi, 2)
            wave = np.sin(2 * np.pi * cycles[0] * t + phases[0]) + 0.5 * np.sin(2 * np.pi * cycles[1] * t + phases[1])
            motifs[c, :, j] = amplitude * window * wave / 1.5
    return motifs


def gen_actions(seed, count, classes=9, n=60, f=8, motif_len=12, min_len=None,
                noise=0.05, prototype_seed=0):
    """Variable-length noise sequences carrying one class motif each.

    True lengths are uniform in ``[min_len, n]`` (default ``max(n // 2,
    motif_len + 1)``); frames past the true length are zero and masked.
    Labels cycle through the classes in a seeded random order.
    """
    if motif_len < 1 or motif_len >= n:
        raise ValueError(f"motif_len must lie in [1, n), got {motif_len} with n={n}")
    min_len = max(n // 2, motif_len + 1) if min_len is None else min_len
    if not motif_len <= min_len <= n:
        raise ValueError(f"min_len must lie in [motif_len, n], got {min_len}")
    motifs = action_motifs(classes, motif_len, f, prototype_seed)
    rng = Rng(seed)
    labels = np.tile(np.arange(classes), count // classes + 1)[:count][rng.permutation(count)]
    inputs, masks, truths = [], [], []
    for label in labels:
        length = int(rng.integers(min_len, n + 1))
        start = int(rng.integers(0, length - motif_len + 1))
        x = np.zeros((n, f))
        x[:length] = rng.normal(0.0, noise, (length, f))
        x[start:start + motif_len] += motifs[label]
        mask = np.zeros(n, dtype=bool)
        mask[:length] = True
        inputs.append(x)
        masks.append(mask)
        truths.append({"length": length, "motif_start": start, "motif_end": start + motif_len})
    gen = dict(task="actions", seed=seed, count=count, classes=classes, n=n, f=f, motif_len=motif_len,
               min_len=min_len, noise=noise, prototype_seed=prototype_seed)
    return SequenceDataset("actions", inputs, masks, labels=[int(v) for v in labels], truths=truths, generator=gen)


GENERATORS = {
    "interpolation": gen_interpolation,
    "extrapolation": gen_extrapolation,
    "keyframe": gen_keyframe,
    "actions": gen_actions,
}


def generate(task, **kwargs):
    try:
        fn = GENERATORS[task]
    except KeyError:
        raise ValueError(f"unknown task {task!r}; choose from {sorted(GENERATORS)}") from None
    return fn(**kwargs)


# ---------------------------------------------------------------- files

def _write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            w.writerow([format(float(v), ".17g") for v in row])


def export_dataset(ds, directory):
    """Write one CSV per sequence plus ``manifest.json``; returns the manifest path.

    Only the unmasked leading frames of each input are written; loading
    pads them back to length n.
    """
    os.makedirs(directory, exist_ok=True)
    seqs = []
    for i in range(len(ds)):
        valid = int(np.asarray(ds.masks[i]).sum())
        if not np.all(ds.masks[i][:valid]):
            raise DatasetError(f"sequence {i}: only trailing padding can be exported")
        entry = {"input": f"seq_{i:05d}_input.csv", "mask_len": valid, "truth": ds.truths[i]}
        _write_csv(os.path.join(directory, entry["input"]), ds.inputs[i][:valid])
        if ds.labels is not None:
            entry["label"] = int(ds.labels[i])
        else:
            entry["target"] = f"seq_{i:05d}_target.csv"
            _write_csv(os.path.join(directory, entry["target"]), ds.targets[i])
        seqs.append(entry)
    manifest = {"task": ds.task, "n": ds.n, "f": ds.f, "sequences": seqs, "generator": ds.generator}
    if ds.labels is not None:
        manifest["num_classes"] = ds.num_classes
    else:
        manifest["m"] = ds.m
    path = os.path.join(directory, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def read_csv_matrix(path, width=None):
    """Parse a numeric CSV (optional header row) into a rows x cols array."""
    if not os.path.isfile(path):
        raise MissingFileError("file not found", path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                if lineno == 1 and not rows and all(not _is_number(c) for c in row):
                    continue
                bad = next(c for c in row if not _is_number(c))
                raise NonNumericError(f"non-numeric cell {bad!r}", path, lineno) from None
            if width is None:
                width = len(values)
            if len(values) != width:
                raise RaggedRowError(f"expected {width} columns, found {len(values)}", path, lineno)
            if not all(np.isfinite(values)):
                raise NonNumericError("non-finite value", path, lineno)
            rows.append(values)
    if not rows:
        raise DatasetError("no data rows", path)
    return np.array(rows, dtype=np.float64)


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_csv_dataset(manifest_path):
    """Load a dataset described by a JSON manifest (see :func:`export_dataset`)."""
    if not os.path.isfile(manifest_path):
        raise MissingFileError("manifest not found", manifest_path)
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            man = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed manifest: {exc}", manifest_path) from exc
    base = os.path.dirname(os.path.abspath(manifest_path))
    try:
        n, f, entries = int(man["n"]), int(man["f"]), man["sequences"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"manifest missing field {exc}", manifest_path) from exc
    if not entries:
        raise DatasetError("manifest lists no sequences", manifest_path)
    classifier = "label" in entries[0]
    inputs, masks, targets, labels, truths = [], [], [], [], []
    for k, e in enumerate(entries):
        if ("label" in e) != classifier:
            raise DatasetError(f"sequence {k} mixes labels and targets", manifest_path)
        path = os.path.join(base, e["input"])
        x = read_csv_matrix(path, f)
        rows = x.shape[0]
        if rows > n:
            raise DatasetError(f"{rows} rows exceed n={n}", path)
        if "mask_len" in e and int(e["mask_len"]) != rows:
            raise DatasetError(f"mask_len {e['mask_len']} disagrees with {rows} data rows", path)
        padded = np.zeros((n, f))
        padded[:rows] = x
        mask = np.zeros(n, dtype=bool)
        mask[:rows] = True
        inputs.append(padded)
        masks.append(mask)
        truths.append(e.get("truth", {}))
        if classifier:
            labels.append(int(e["label"]))
        else:
            tpath = os.path.join(base, e["target"])
            y = read_csv_matrix(tpath, f)
            m = int(man.get("m", y.shape[0]))
            if y.shape[0] != m:
                raise DatasetError(f"target has {y.shape[0]} rows, manifest says m={m}", tpath)
            targets.append(y)
    gen = dict(man.get("generator", {}))
    if classifier:
        K = int(man.get("num_classes", gen.get("classes", max(labels) + 1)))
        if any(not 0 <= v < K for v in labels):
            raise DatasetError(f"label outside [0, {K})", manifest_path)
        gen.setdefault("classes", K)
        return SequenceDataset(man.get("task", "csv"), inputs, masks, labels=labels, truths=truths, generator=gen)
    return SequenceDataset(man.get("task", "csv"), inputs, masks, targets=targets, truths=truths, generator=gen)
