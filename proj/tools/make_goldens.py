#!/usr/bin/env python3
"""Generates tests/fixtures/golden_cases.txt.

Every expected value below is computed from first principles with plain
Python math (direct formula evaluation, exhaustive threshold sweeps, hand
arithmetic) and shares no code with the C++ library it checks. Run from the
repository root:

    python3 tools/make_goldens.py
"""

import math
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures", "golden_cases.txt")


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


class Case:
    def __init__(self, name, tolerance):
        self.name = name
        self.tolerance = tolerance
        self.lines = []

    def tensor(self, label, rows):
        self.lines.append(f"tensor {label} {len(rows)} {len(rows[0])}")
        for r in rows:
            self.lines.append(" ".join(repr(float(v)) for v in r))

    def scalar(self, label, v):
        self.lines.append(f"scalar {label} {v!r}")

    def text(self, label, s):
        self.lines.append(f"text {label} {s}")

    def expect_tensor(self, label, rows):
        self.lines.append(f"expect_tensor {label} {len(rows)} {len(rows[0])}")
        for r in rows:
            self.lines.append(" ".join(repr(float(v)) for v in r))

    def expect_scalar(self, label, v):
        self.lines.append(f"expect_scalar {label} {v!r}")

    def expect_text(self, label, s):
        self.lines.append(f"expect_text {label} {s}")

    def render(self):
        body = "\n".join(self.lines)
        return f"case {self.name}\ntolerance {self.tolerance!r}\n{body}\nend\n"


cases = []


def case(name, tol=1e-9):
    c = Case(name, tol)
    cases.append(c)
    return c


# --- dense kernels -----------------------------------------------------------

c = case("affine_scalar", 1e-12)
c.tensor("x", [[2.0]])
c.tensor("w", [[3.0]])
c.tensor("b", [[1.0]])
c.expect_tensor("y", [[2.0 * 3.0 + 1.0]])

c = case("softmax_row_01")
c.tensor("x", [[0.0, 1.0]])
z = [math.exp(0.0), math.exp(1.0)]
s = sum(z)
c.expect_tensor("y", [[z[0] / s, z[1] / s]])

# --- temporal branch ---------------------------------------------------------

# Layer aggregation, L=2, T=1, D=1, h1=2, h2=4, u=1, b=0:
# w_i = sigmoid(h_i), out = w1*h1 + w2*h2.
c = case("sls_hand")
c.tensor("h1", [[2.0]])
c.tensor("h2", [[4.0]])
c.tensor("u", [[1.0]])
c.scalar("b", 0.0)
c.expect_scalar("w1", sigmoid(2.0))
c.expect_scalar("w2", sigmoid(4.0))
c.expect_scalar("out", sigmoid(2.0) * 2.0 + sigmoid(4.0) * 4.0)

# Breath gating with 1x1 weights: g = sigmoid(w2*relu(w1*m)), out = (1+g)*x.
c = case("film_hand_m1")
c.scalar("w1", 1.0)
c.scalar("w2", 1.0)
c.scalar("mask_bit", 1.0)
c.scalar("x", 2.0)
g = sigmoid(max(0.0, 1.0 * 1.0) * 1.0)
c.expect_scalar("out", (1.0 + g) * 2.0)

c = case("film_hand_m0")
c.scalar("w1", 1.0)
c.scalar("w2", 1.0)
c.scalar("mask_bit", 0.0)
c.scalar("x", 2.0)
g = sigmoid(max(0.0, 0.0) * 1.0)  # sigmoid(0) = 0.5
c.expect_scalar("out", (1.0 + g) * 2.0)

# --- frequency branch --------------------------------------------------------

c = case("preemph_recurrence", 1e-12)
x = [1.0, 2.0, 3.0]
coeff = 0.97
y = [x[0]] + [x[n] - coeff * x[n - 1] for n in range(1, 3)]
c.tensor("x", [x])
c.scalar("coeff", coeff)
c.expect_tensor("y", [y])

c = case("pool_binwise", 1e-12)
c.tensor("map", [[1.0, 2.0, 3.0, 4.0], [4.0, 3.0, 2.0, 1.0]])
c.scalar("bins", 2)
c.expect_tensor("pooled", [[max(1.0, 2.0), max(3.0, 4.0)], [max(4.0, 3.0), max(2.0, 1.0)]])

# --- fusion ------------------------------------------------------------------

# Single head, d_k = 1, identity projections: weights = softmax(q*K), out = w.V
c = case("attention_hand")
c.tensor("q", [[1.0]])
c.tensor("keys", [[0.0], [1.0]])
c.tensor("values", [[1.0], [2.0]])
logits = [1.0 * 0.0, 1.0 * 1.0]
e = [math.exp(v) for v in logits]
w = [v / sum(e) for v in e]
c.expect_scalar("out", w[0] * 1.0 + w[1] * 2.0)

# --- losses ------------------------------------------------------------------


def cos(a, b):
    num = sum(x * y for x, y in zip(a, b))
    return num / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def pscl_bruteforce(embs, tau):
    n = len(embs)
    total = 0.0
    for i in range(n):
        inner = 0.0
        denom = sum(math.exp(cos(embs[i], embs[k]) / tau) for k in range(n) if k != i)
        for j in range(n):
            if j == i:
                continue
            inner += math.log(math.exp(cos(embs[i], embs[j]) / tau) / denom)
        total += inner / (n - 1)
    return -total / n


c = case("pscl_identical_ln2")
embs = [[1.0, 2.0]] * 3
c.tensor("z1", [embs[0]])
c.tensor("z2", [embs[1]])
c.tensor("z3", [embs[2]])
c.scalar("tau", 0.1)
c.expect_scalar("loss", pscl_bruteforce(embs, 0.1))
assert abs(pscl_bruteforce(embs, 0.1) - math.log(2.0)) < 1e-12

c = case("pscl_orthogonal_pair")
embs = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
c.tensor("z1", [embs[0]])
c.tensor("z2", [embs[1]])
c.tensor("z3", [embs[2]])
c.scalar("tau", 1.0)
c.expect_scalar("loss", pscl_bruteforce(embs, 1.0))

for name, z, expected in [
    ("center_same", [3.0, 4.0], 0.0),
    ("center_anti", [-3.0, -4.0], 1.0),
    ("center_ortho", [-4.0, 3.0], 0.5),
]:
    c = case(name)
    c.tensor("z", [z])
    c.tensor("center", [[3.0, 4.0]])
    c.expect_scalar("loss", (1.0 - cos(z, [3.0, 4.0])) / 2.0)
    assert abs((1.0 - cos(z, [3.0, 4.0])) / 2.0 - expected) < 1e-12


def contrast_bruteforce(fakes, center):
    n = len(fakes)
    single = sum((1.0 + cos(z, center)) / 2.0 for z in fakes) / n
    if n < 2:
        return single
    pair_terms = []
    for a in range(n):
        for b in range(a + 1, n):
            mix = [(x + y) / 2.0 for x, y in zip(fakes[a], fakes[b])]
            pair_terms.append((1.0 + cos(mix, center)) / 2.0)
    return single + sum(pair_terms) / len(pair_terms)


c = case("contrast_anti")
fakes = [[-1.0, 0.0, 0.0], [-2.0, 0.0, 0.0]]
center = [1.0, 0.0, 0.0]
c.tensor("f1", [fakes[0]])
c.tensor("f2", [fakes[1]])
c.tensor("center", [center])
c.expect_scalar("loss", contrast_bruteforce(fakes, center))
assert abs(contrast_bruteforce(fakes, center) - 0.0) < 1e-12

c = case("contrast_same")
fakes = [[2.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
c.tensor("f1", [fakes[0]])
c.tensor("f2", [fakes[1]])
c.tensor("center", [center])
c.expect_scalar("loss", contrast_bruteforce(fakes, center))
assert abs(contrast_bruteforce(fakes, center) - 2.0) < 1e-12

c = case("contrast_orthonormal")
fakes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
center_e3 = [0.0, 0.0, 1.0]
c.tensor("f1", [fakes[0]])
c.tensor("f2", [fakes[1]])
c.tensor("center", [center_e3])
c.expect_scalar("loss", contrast_bruteforce(fakes, center_e3))
assert abs(contrast_bruteforce(fakes, center_e3) - 1.0) < 1e-12

c = case("feature_sum", 1e-12)
c.scalar("pscl", 0.6931)
c.scalar("center", 0.5)
c.scalar("contrast", 1.0)
c.scalar("alpha", 1.0)
c.scalar("beta", 1.0)
c.expect_scalar("loss", 0.6931 + 1.0 * 0.5 + 1.0 * 1.0)

c = case("ce_bonafide_uniform")
c.tensor("probs", [[0.5, 0.5]])
c.scalar("label", 0)
c.expect_scalar("loss", -0.9 * math.log(0.5))

c = case("ce_spoof_uniform")
c.tensor("probs", [[0.5, 0.5]])
c.scalar("label", 1)
c.expect_scalar("loss", -0.1 * math.log(0.5))

c = case("total_hand", 1e-12)
c.scalar("ce", 1.0)
c.scalar("feature", 2.0)
c.scalar("lambda", 0.5)
c.expect_scalar("loss", 1.0 + 0.5 * 2.0)

c = case("center_update_momentum", 1e-12)
c.tensor("c_old", [[1.0, 0.0]])
c.tensor("zbar", [[0.0, 1.0]])
c.scalar("mu", 0.9)
c.expect_tensor("c_new", [[0.9 * 1.0 + 0.1 * 0.0, 0.9 * 0.0 + 0.1 * 1.0]])

# --- classifier --------------------------------------------------------------

c = case("pool_mean_rows", 1e-12)
c.tensor("seq", [[1.0, 3.0], [3.0, 1.0]])
c.expect_tensor("pooled", [[2.0, 2.0]])

# --- metrics -----------------------------------------------------------------


def sweep_eer(bona, spoof):
    """Exhaustive threshold sweep; same interpolation contract as the spec."""
    points = []
    for t in sorted(set(bona) | set(spoof)):
        frr = sum(1 for s in bona if s < t) / len(bona)
        far = sum(1 for s in spoof if s >= t) / len(spoof)
        points.append((frr, far))
    points.append((1.0, 0.0))
    for i, (frr, far) in enumerate(points):
        if frr >= far:
            if frr == far or i == 0:
                return frr
            pf, pa = points[i - 1]
            denom = (frr - pf) + (pa - far)
            alpha = (pa - pf) / denom
            return pf + alpha * (frr - pf)
    raise AssertionError


c = case("eer_one_third", 1e-12)
bona = [0.8, 0.6, 0.4]
spoof = [0.5, 0.3, 0.1]
c.tensor("bona", [bona])
c.tensor("spoof", [spoof])
c.expect_scalar("eer", sweep_eer(bona, spoof))
assert abs(sweep_eer(bona, spoof) - 1.0 / 3.0) < 1e-12

c = case("mindcf_all_equal", 1e-12)
# All scores identical: the only useful decision is reject-all, cost
# Cmiss*prior = 0.05 = the normalizer, so the normalized cost is exactly 1.
c.tensor("bona", [[0.5, 0.5]])
c.tensor("spoof", [[0.5, 0.5]])
c.expect_scalar("mindcf", 1.0)

c = case("cllr_ln3")
s = math.log(3.0)
c.tensor("bona", [[s]])
c.tensor("spoof", [[-s]])
v = 0.5 * (math.log2(1.0 + math.exp(-s)) + math.log2(1.0 + math.exp(-s)))
c.expect_scalar("cllr", v)
assert abs(v - math.log2(4.0 / 3.0)) < 1e-12

c = case("cllr_zero_scores", 1e-12)
c.tensor("bona", [[0.0, 0.0]])
c.tensor("spoof", [[0.0]])
c.expect_scalar("cllr", 1.0)

# --- breath mask -------------------------------------------------------------

# Frame grid of 0.1 s; interval [0.25, 0.55) covers exactly 50% of frames 2
# and 5 and all of frames 3-4; the >= 50% rule sets bits 2..5.
c = case("mask_coverage_rule", 0.0)
c.text("intervals", "0.25:0.55")
c.scalar("frames", 10)
c.scalar("frame_duration", 0.1)
bits = ""
for t in range(10):
    lo, hi = t * 0.1, (t + 1) * 0.1
    covered = max(0.0, min(hi, 0.55) - max(lo, 0.25))
    bits += "1" if covered >= 0.05 - 1e-15 else "0"
c.expect_text("bits", bits)
assert bits == "0011110000"

os.makedirs(os.path.dirname(OUT), exist_ok=True)
with open(OUT, "w") as f:
    f.write("# generated by tools/make_goldens.py -- do not edit by hand\n")
    for c in cases:
        f.write(c.render())
print(f"wrote {len(cases)} cases to {os.path.normpath(OUT)}")
