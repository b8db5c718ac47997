"""Rate-accuracy curves and the average accuracy difference between two codecs.

The metric fits a cubic to accuracy as a function of log10(rate) for each
curve and integrates the difference over the shared log-rate interval; the
result is the mean task-accuracy gain of the test codec over the anchor at
equal rate.  Positive means the test curve sits above the anchor.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from taskcodec.errors import ConfigurationError, EvaluationError

MIN_POINTS = 4  # a cubic fit needs at least four samples


@dataclass
class RateAccuracyCurve:
    label: str
    bpp: np.ndarray
    accuracy: np.ndarray
    lams: list[float] | None = None

    def __post_init__(self) -> None:
        self.bpp = np.asarray(self.bpp, dtype=np.float64)
        self.accuracy = np.asarray(self.accuracy, dtype=np.float64)
        if self.bpp.ndim != 1 or self.bpp.shape != self.accuracy.shape:
            raise ConfigurationError("bpp and accuracy must be equal-length vectors")
        if len(self.bpp) < MIN_POINTS:
            raise ConfigurationError(
                f"a curve needs at least {MIN_POINTS} points for the cubic fit, "
                f"got {len(self.bpp)}"
            )
        if np.any(self.bpp <= 0):
            raise ConfigurationError("rates must be strictly positive")
        if len(np.unique(self.bpp)) != len(self.bpp):
            raise ConfigurationError("duplicate rates make the fit ill-posed")
        if np.any(self.accuracy < 0) or np.any(self.accuracy > 1):
            raise ConfigurationError("accuracy values must lie in [0, 1]")
        order = np.argsort(self.bpp)
        self.bpp = self.bpp[order]
        self.accuracy = self.accuracy[order]
        if self.lams is not None:
            if len(self.lams) != len(self.bpp):
                raise ConfigurationError("lams must align with the curve points")
            self.lams = [self.lams[i] for i in order]


def bd_accuracy(test: RateAccuracyCurve, anchor: RateAccuracyCurve) -> float:
    """Mean accuracy difference (test - anchor) over the shared log-rate range."""
    lt, la = np.log10(test.bpp), np.log10(anchor.bpp)
    lo = max(lt.min(), la.min())
    hi = min(lt.max(), la.max())
    if hi <= lo:
        raise EvaluationError(
            f"curves do not overlap in rate: [{10 ** lt.min():.4g}, {10 ** lt.max():.4g}] "
            f"vs [{10 ** la.min():.4g}, {10 ** la.max():.4g}]"
        )
    for name, lx in (("test", lt), ("anchor", la)):
        inside = np.sum((lx >= lo) & (lx <= hi))
        if inside < 2:
            raise EvaluationError(
                f"only {inside} {name} point(s) fall in the shared rate range"
            )
    fit_test = np.polyfit(lt, test.accuracy, 3)
    fit_anchor = np.polyfit(la, anchor.accuracy, 3)
    int_test = np.polyint(fit_test)
    int_anchor = np.polyint(fit_anchor)
    area = (np.polyval(int_test, hi) - np.polyval(int_test, lo)) - (
        np.polyval(int_anchor, hi) - np.polyval(int_anchor, lo)
    )
    return float(area / (hi - lo))


def build_curve(label: str, points: list[tuple[float, float, float]]) -> RateAccuracyCurve:
    """Curve from (lambda, bpp, accuracy) triples, one per trained model."""
    if not points:
        raise ConfigurationError("no evaluation points supplied")
    lams = [p[0] for p in points]
    return RateAccuracyCurve(
        label,
        np.array([p[1] for p in points]),
        np.array([p[2] for p in points]),
        lams=lams,
    )


def write_curve_csv(path, curve: RateAccuracyCurve) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "lambda", "bpp", "accuracy"])
        lams = curve.lams if curve.lams is not None else [""] * len(curve.bpp)
        for lam, bpp, acc in zip(lams, curve.bpp, curve.accuracy):
            writer.writerow([curve.label, lam, f"{bpp:.8g}", f"{acc:.8g}"])


def read_curve_csv(path) -> RateAccuracyCurve:
    labels, lams, bpps, accs = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"label", "lambda", "bpp", "accuracy"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ConfigurationError(
                f"curve CSV needs columns {sorted(required)}, got {reader.fieldnames}"
            )
        for row in reader:
            labels.append(row["label"])
            lams.append(float(row["lambda"]) if row["lambda"] else np.nan)
            bpps.append(float(row["bpp"]))
            accs.append(float(row["accuracy"]))
    if not labels:
        raise ConfigurationError("curve CSV holds no points")
    label = labels[0]
    if any(l != label for l in labels):
        raise ConfigurationError(f"curve CSV mixes labels: {sorted(set(labels))}")
    has_lams = not any(np.isnan(l) for l in lams)
    return RateAccuracyCurve(
        label, np.array(bpps), np.array(accs), lams=lams if has_lams else None
    )
