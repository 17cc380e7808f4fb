import numpy as np
import pytest

from nilm_ssl import nn
from nilm_ssl.data.series import PowerSeries

H = 1e-5
# gradients below this are compared absolutely: central differences of an
# O(1) loss carry ~1e-12 of cancellation noise
GRAD_FLOOR = 1e-7


class ReluPattern:
    """Records the on/off pattern of every ReLU evaluated while active."""

    def __init__(self):
        self.masks = []
        self._orig = nn._act

    def __enter__(self):
        def recording(name, x):
            if name == "relu":
                self.masks.append(np.packbits(x > 0).tobytes())
            return self._orig(name, x)

        nn._act = recording
        return self

    def __exit__(self, *exc):
        nn._act = self._orig


def gradcheck(net, x, n_coords=100, seed=0, training=False, check_input=True):
    """Central differences of sum(out * R) against backprop.

    Returns ``(worst relative error, coordinates checked, coordinates skipped)``.
    Every trainable tensor contributes at least one coordinate; the rest are
    uniform over all parameters.  A coordinate whose +-h perturbation flips a
    ReLU somewhere sits on a kink, is skipped and replaced.
    """
    rng = np.random.default_rng(seed)
    fwd_seed = int(rng.integers(1 << 30))

    def run():
        return net.forward(x, training=training, rng=np.random.default_rng(fwd_seed))

    def loss():
        with ReluPattern() as rec:
            value = float((run() * R).sum())
        return value, rec.masks

    out = run()
    R = rng.normal(size=out.shape)
    net.params.zero_grad()
    _, base = loss()
    run()
    dx = net.backward(R, input_grad=True)

    names = [n for n, p in net.params.items() if p.trainable]
    sizes = np.array([net.params[n].value.size for n in names])
    ends = np.cumsum(sizes)
    first = [(j, int(rng.integers(sizes[j]))) for j in range(len(names))]
    pool = []
    for g in rng.choice(int(ends[-1]), size=min(4 * n_coords, int(ends[-1])), replace=False):
        j = int(np.searchsorted(ends, g, side="right"))
        pool.append((j, int(g - (ends[j] - sizes[j]))))

    def coords():
        seen = set()
        for c in first + pool:
            if c not in seen:
                seen.add(c)
                p = net.params[names[c[0]]]
                yield p.value.reshape(-1), c[1], float(p.grad.reshape(-1)[c[1]]), "param"
        if check_input:
            xf, gf = x.reshape(-1), dx.reshape(-1)
            for i in rng.permutation(xf.size)[:80]:
                yield xf, int(i), float(gf[i]), "input"

    worst, done, skipped = 0.0, {"param": 0, "input": 0}, 0
    want = {"param": max(min(n_coords, int(ends[-1])), len(first)), "input": 20 if check_input else 0}
    for arr, i, analytic, kind in coords():
        if done[kind] >= want[kind]:
            continue
        old = arr[i]
        arr[i] = old + H
        up, m_up = loss()
        arr[i] = old - H
        down, m_down = loss()
        arr[i] = old
        if m_up != base or m_down != base:
            skipped += 1
            continue
        numeric = (up - down) / (2 * H)
        scale = max(abs(analytic), abs(numeric), GRAD_FLOOR)
        worst = max(worst, abs(analytic - numeric) / scale)
        done[kind] += 1
    return worst, done["param"] + done["input"], skipped


def series(values, start=0, period=60, valid=None):
    values = np.asarray(values, dtype=float)
    if valid is None:
        valid = np.ones(len(values), dtype=bool)
    return PowerSeries(start, period, values, np.asarray(valid, dtype=bool))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tiny_case(out_dir, seed=0, days=2, archs=("BiGRU",), schemes=("ZSL", "PSSL", "FSSL"),
              appliances=("fridge",), **training):
    """A small desk corpus plus a config dict trimmed for test speed."""
    import yaml
    from nilm_ssl.pipeline import write_desk_case

    path = write_desk_case(out_dir, days=days, seed=seed)
    cfg = yaml.safe_load(path.read_text())
    cfg.update(architectures=list(archs), schemes=list(schemes), appliances=list(appliances),
               batch_size=32)
    cfg["sources"] = {a: cfg["sources"][a] for a in appliances}
    cfg["training"] = dict({"max_epochs": 2, "patience": 6, "validation_fraction": 0.1,
                            "steps_per_epoch": 4}, **training)
    cfg.pop("training_overrides", None)
    path.write_text(yaml.safe_dump(cfg, sort_keys=False))
    return path


# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
