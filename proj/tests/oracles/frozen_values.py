"""Independent high-precision recomputation of the constants frozen into the unit tests.

Run with: python3 tests/oracles/frozen_values.py
"""
from mpmath import mp, mpf, log, exp, tanh, log1p

mp.dps = 40


def sig(x):
    return 1 / (1 + exp(-x))


print("idf token in 1 of 4 templates:", log(mpf(5) / 2) + 1)
print("bce(20, 1):", log1p(exp(-20)))

# Two GRU steps with 1x1 weights.
Wz, Uz, bz = mpf("0.3"), mpf("0.6"), mpf("0.1")
Wr, Ur, br = mpf("-0.2"), mpf("-0.5"), mpf("0.05")
Wc, Uc, bc = mpf("0.7"), mpf("0.9"), mpf("-0.1")
h = mpf(0)
for x in (mpf("0.5"), mpf("-0.4")):
    z = sig(Wz * x + Uz * h + bz)
    r = sig(Wr * x + Ur * h + br)
    c = tanh(Wc * x + Uc * (r * h) + bc)
    h = (1 - z) * h + z * c
    print("gru h:", h)

# Attention over two 2-d hidden states.
H = [(mpf("0.2"), mpf("-0.1")), (mpf("0.5"), mpf("0.3"))]
Wa = [(mpf(1), mpf("0.5")), (mpf("-0.3"), mpf("0.8"))]
ba = (mpf("0.1"), mpf("-0.2"))
q = (mpf("0.7"), mpf("-0.4"))
scores = []
for hv in H:
    u = [tanh(Wa[i][0] * hv[0] + Wa[i][1] * hv[1] + ba[i]) for i in range(2)]
    scores.append(q[0] * u[0] + q[1] * u[1])
den = sum(exp(s) for s in scores)
w = [exp(s) / den for s in scores]
print("attention weights:", w)
print("attention rep:", [w[0] * H[0][k] + w[1] * H[1][k] for k in range(2)])

# Domain loss on a 2-source / 2-target toy batch where the pooled feature of a
# length-1 sequence is its hidden state; logits supplied directly.
src_logits = [mpf("0.4"), mpf("-1.2")]
tgt_logits = [mpf("2.0"), mpf("-0.3")]
def bce(z, y):
    return max(z, 0) - z * y + log1p(exp(-abs(z)))
print("domain loss toy:", (sum(bce(z, 0) for z in src_logits) + sum(bce(z, 1) for z in tgt_logits)) / 4)

# Metrics from the published precision/recall pairs.
for p, r in (("94.35", "96.64"), ("93.28", "96.53"), ("90.18", "93.85"), ("91.74", "92.88")):
    p, r = mpf(p), mpf(r)
    print("f1", p, r, 2 * p * r / (p + r))
