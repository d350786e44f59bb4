"""Inference-arrival scenarios and TinyML model profiles.

A stream is a list of per-slice arrival counts.  Levels and periods of the
six scenarios are plain parameters (see :class:`ScenarioParams`).
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from hhpim.model import ConfigError

SCENARIOS = ("case1", "case2", "case3", "case4", "case5", "case6")


class UnknownScenario(ValueError):
    pass


@dataclass(frozen=True)
class ModelProfile:
    name: str
    param_count: int
    mac_count: int
    pim_op_fraction: float

    def __post_init__(self):
        if self.param_count <= 0 or self.mac_count <= 0:
            raise ValueError(f"{self.name}: counts must be positive")
        if not 0 < self.pim_op_fraction <= 1:
            raise ValueError(f"{self.name}: pim_op_fraction must be in (0, 1]")

    @property
    def ops_per_weight(self) -> float:
        """PIM MACs each stored weight takes part in, per inference."""
        return self.mac_count * self.pim_op_fraction / self.param_count


MODELS = {
    "efficientnet": ModelProfile("EfficientNet-B0", 95_000, 3_245_000, 0.85),
    "mobilenetv2": ModelProfile("MobileNetV2", 101_000, 2_528_000, 0.80),
    "resnet18": ModelProfile("ResNet-18", 256_000, 29_580_000, 0.75),
}


def get_model(name: str) -> ModelProfile:
    key = name.lower().replace("-", "").replace("_", "")
    for k, prof in MODELS.items():
        if key in (k, prof.name.lower().replace("-", "").replace("_", "")):
            return prof
    raise ConfigError(f"unknown model {name!r} (have {sorted(MODELS)})")


@dataclass(frozen=True)
class ScenarioParams:
    low_fraction: float = 0.2   # low level as a fraction of max
    spike_period_case3: int = 10
    spike_period_case4: int = 4
    block_len: int = 5          # case 5 half-period


@dataclass(frozen=True)
class TaskStream:
    scenario: str
    arrivals: tuple[int, ...]
    seed: int
    max_per_slice: int
    model: str = ""
    params: ScenarioParams = field(default_factory=ScenarioParams)

    def __post_init__(self):
        for a in self.arrivals:
            if not 0 <= a <= self.max_per_slice:
                raise ValueError(f"arrival count {a} outside [0, {self.max_per_slice}]")

    def __len__(self):
        return len(self.arrivals)

    def scaled(self, extra: int) -> "TaskStream":
        """Same shape with ``extra`` more arrivals per slice (clipped)."""
        arr = tuple(min(self.max_per_slice, a + extra) for a in self.arrivals)
        return TaskStream(self.scenario, arr, self.seed, self.max_per_slice, self.model, self.params)


def _canonical(scenario: str) -> str:
    s = str(scenario).lower().replace(" ", "").replace("_", "")
    if s.isdigit():
        s = "case" + s
    if s not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {scenario!r} (have {', '.join(SCENARIOS)})")
    return s


def generate(scenario: str, slice_count: int = 50, max_per_slice: int = 10, seed: int = 0,
             params: ScenarioParams | None = None, model: str = "") -> TaskStream:
    if slice_count < 1:
        raise ValueError("slice_count must be >= 1")
    if max_per_slice < 0:
        raise ValueError("max_per_slice must be >= 0")
    sc = _canonical(scenario)
    p = params or ScenarioParams()
    hi = max_per_slice
    lo = int(round(p.low_fraction * max_per_slice))
    idx = np.arange(slice_count)
    if sc == "case1":
        arr = np.full(slice_count, lo)
    elif sc == "case2":
        arr = np.full(slice_count, hi)
    elif sc == "case3":
        arr = np.where(idx % p.spike_period_case3 == p.spike_period_case3 - 1, hi, lo)
    elif sc == "case4":
        arr = np.where(idx % p.spike_period_case4 == p.spike_period_case4 - 1, hi, lo)
    elif sc == "case5":
        arr = np.where((idx // p.block_len) % 2 == 0, hi, lo)
    else:
        arr = np.random.default_rng(seed).integers(0, hi + 1, size=slice_count)
    return TaskStream(sc, tuple(int(a) for a in arr), seed, max_per_slice, model, p)


def dumps_stream(stream: TaskStream) -> str:
    buf = io.StringIO()
    buf.write(f"# scenario: {stream.scenario}\n# seed: {stream.seed}\n")
    buf.write(f"# max_per_slice: {stream.max_per_slice}\n# model: {stream.model}\n")
    for k, v in asdict(stream.params).items():
        buf.write(f"# param.{k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slice_idx", "arrivals"])
    for i, a in enumerate(stream.arrivals):
        w.writerow([i, a])
    return buf.getvalue()


def loads_stream(text: str) -> TaskStream:
    meta = {}
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition(":")
            meta[k.strip()] = v.strip()
        elif line.strip():
            rows.append(line)
    reader = csv.reader(rows)
    header = next(reader, None)
    if header != ["slice_idx", "arrivals"]:
        raise ValueError(f"bad stream header {header}")
    arrivals = []
    for n, (i, a) in enumerate(reader):
        if int(i) != n:
            raise ValueError(f"slice index {i} out of order")
        arrivals.append(int(a))
    fields = ScenarioParams.__dataclass_fields__
    params = ScenarioParams(**{k[6:]: type(getattr(ScenarioParams(), k[6:]))(v)
                               for k, v in meta.items() if k.startswith("param.") and k[6:] in fields})
    max_per = int(meta.get("max_per_slice", max(arrivals, default=0)))
    return TaskStream(meta.get("scenario", "custom"), tuple(arrivals), int(meta.get("seed", 0)),
                      max_per, meta.get("model", ""), params)
