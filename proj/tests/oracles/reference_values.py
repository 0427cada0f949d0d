"""Independent numpy reference for the frozen values in the C++ tests.

Parameters are filled deterministically: the k-th scalar of a group (tensors
in group order, row-major) is amp*sin(0.37*k + phase). Run with python3 and
paste the printed values into the tests when a definition changes.
"""
import numpy as np


def fill(shapes, phase=0.11, amp=0.5):
    out, k = [], 0
    for r, c in shapes:
        a = np.empty((r, c))
        for i in range(r):
            for j in range(c):
                a[i, j] = amp * np.sin(0.37 * k + phase)
                k += 1
        out.append(a)
    return out


def inputs(r, c, phase=0.2):
    return np.array([[0.8 * np.cos(0.53 * (i * c + j) + phase) for j in range(c)] for i in range(r)])


sig = lambda z: 1.0 / (1.0 + np.exp(-z))
relu = lambda z: np.maximum(z, 0.0)


def lstm_params(d, h, phase=0.11):
    shapes = [(d, h)] * 4 + [(h, h)] * 4 + [(1, h)] * 4
    t = fill(shapes, phase)
    return {g: (t[n], t[4 + n], t[8 + n]) for n, g in enumerate("cifo")}


def lstm_step(p, x, h, c):
    pre = {g: x @ W + h @ U + b for g, (W, U, b) in p.items()}
    ct = np.tanh(pre["c"])
    i, f, o = sig(pre["i"]), sig(pre["f"]), sig(pre["o"])
    c = i * ct + f * c
    return o * np.tanh(c), c


def show(name, a):
    a = np.atleast_1d(np.asarray(a, dtype=float)).ravel()
    print(name, "=", ", ".join(repr(float(v)) for v in a))


# LSTM step, d=2, h=3.
p = lstm_params(2, 3)
x = inputs(1, 2)
h0 = 0.3 * np.sin(np.arange(3.0)).reshape(1, 3)
c0 = 0.2 * np.cos(np.arange(3.0)).reshape(1, 3)
h1, c1 = lstm_step(p, x, h0, c0)
show("lstm_h", h1)
show("lstm_c", c1)

# Autoencoder, d=2, h=3: enc (d,h), dec (h,h), out.W (h,d), out.b (1,d), one counter.
d, hid = 2, 3
shapes = ([(d, hid)] * 4 + [(hid, hid)] * 4 + [(1, hid)] * 4 + [(hid, hid)] * 4 + [(hid, hid)] * 4 +
          [(1, hid)] * 4 + [(hid, d), (1, d)])
t = fill(shapes)
enc = {g: (t[n], t[4 + n], t[8 + n]) for n, g in enumerate("cifo")}
dec = {g: (t[12 + n], t[16 + n], t[20 + n]) for n, g in enumerate("cifo")}
out_w, out_b = t[24], t[25]
seqs = [np.array([[1, 0], [0, 1], [1, 1]], float), np.array([[0, 0], [1, 0]], float)]
losses = []
for k, s in enumerate(seqs):
    h = np.zeros((1, hid)); c = np.zeros((1, hid))
    for row in s:
        h, c = lstm_step(enc, row.reshape(1, d), h, c)
    v = h
    if k == 0:
        show("ae_v0", v)
    h = np.zeros((1, hid)); c = np.zeros((1, hid))
    rec = []
    for _ in range(len(s)):
        h, c = lstm_step(dec, v, h, c)
        rec.append(sig(h @ out_w + out_b))
    rec = np.vstack(rec)
    if k == 0:
        show("ae_decode0", rec)
    losses.append(((rec - s) ** 2).sum())
show("ae_loss", np.mean(losses))

# GAN pieces: D 3 -> 4 -> 2 -> softmax(2); G 2 -> 3 -> 3.
DW1, Db1, DW2, Db2, DW3, Db3 = fill([(3, 4), (1, 4), (4, 2), (1, 2), (2, 2), (1, 2)], amp=1.5)
PW1, Pb1, PW2, Pb2, PW3, Pb3 = fill([(3, 4), (1, 4), (4, 2), (1, 2), (2, 2), (1, 2)], phase=5.2, amp=1.5)
GW1, Gb1, GW2, Gb2 = fill([(2, 3), (1, 3), (3, 3), (1, 3)], phase=0.5, amp=1.5)


def disc(v, W1, b1, W2, b2, W3, b3):
    f = relu(relu(v @ W1 + b1) @ W2 + b2)
    z = f @ W3 + b3
    e = np.exp(z - z.max(1, keepdims=True))
    return (e / e.sum(1, keepdims=True))[:, 0], f


clamp = lambda q: np.clip(q, 1e-7, 1 - 1e-7)
real = 1.5 * inputs(3, 3)
z = inputs(4, 2, phase=0.9)
fake = np.tanh(relu(z @ GW1 + Gb1) @ GW2 + Gb2)
show("gan_fake", fake)
pr, fr = disc(real, DW1, Db1, DW2, Db2, DW3, Db3)
pf, ff = disc(fake, DW1, Db1, DW2, Db2, DW3, Db3)
pp, _ = disc(fake, PW1, Pb1, PW2, Pb2, PW3, Pb3)
show("gan_p_real", pr)
show("gan_p_fake", pf)
show("gan_p_proxy", pp)
show("regular_d", np.log(clamp(pr)).mean() + np.log(1 - clamp(pf)).mean())
show("regular_g", np.log(1 - clamp(pf)).mean())
show("non_saturating_g", -np.log(clamp(pf)).mean())
show("ocan_d", np.log(clamp(pr)).mean() + np.log(1 - clamp(pf)).mean() + (clamp(pr) * np.log(clamp(pr))).mean())
n = ff.shape[0]
u = ff / np.maximum(np.linalg.norm(ff, axis=1, keepdims=True), 1e-12)
cos2 = (u @ u.T) ** 2
pt = (cos2.sum() - np.trace(cos2)) / (n * (n - 1))
fm = ((ff.mean(0) - fr.mean(0)) ** 2).sum()
eps = float(np.median(pp))
dens = (np.log(clamp(pp)) * (pp > eps)).mean()
show("pull_away", pt)
show("feature_matching", fm)
show("density_eps", eps)
show("density_term", dens)
show("complementary_g", pt + dens + fm)
