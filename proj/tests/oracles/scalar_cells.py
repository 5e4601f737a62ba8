"""Independent d=1 evaluation of the recurrent cell equations.

All weights 1, all biases 0, x=1, pi=1. LSTM variants start from h=c=0,
GRU variants from h=1. Prints values with 17 significant digits.
"""
from math import exp, tanh


def sig(v):
    return 1.0 / (1.0 + exp(-v))


def lstm(x, h, c, extra=0.0):
    f = sig(x + h + extra)
    i = sig(x + h + extra)
    g = tanh(x + h)
    o = sig(x + h + extra)
    c2 = f * c + i * g
    return o * tanh(c2), c2


def gru(x, h):
    z = sig(x + h)
    r = sig(x + h)
    ht = tanh(x + r * h)
    return (1 - z) * h + z * ht


x, pi = 1.0, 1.0
out = {}
out["lstm_h"], out["lstm_c"] = lstm(x, 0.0, 0.0)
out["gru_h"] = gru(x, 1.0)
# concat: x~ = [x; pi], each weight row is 1 so the pre-activation gains +pi
f = sig(x + pi); c = f * tanh(x + pi)
out["lstm_concat_h"], out["lstm_concat_c"] = sig(x + pi) * tanh(c), c
z = sig(x + pi + 1.0); ht = tanh(x + pi + z * 1.0)
out["gru_concat_h"] = (1 - z) * 1.0 + z * ht
# lstm +gate
h0, c0 = 0.0, 0.0
f = sig(x + h0 + pi); i = sig(x + h0 + pi); g = tanh(x + h0)
c = f * c0 + i * g; o = sig(x + h0 + pi); os = sig(x + h0 + pi)
out["lstm_gate_h"] = o * tanh(c) + os * tanh(pi); out["lstm_gate_c"] = c
# gru +gate
h0 = 1.0
z = sig(x + h0 + pi); r = sig(x + h0 + pi); os = sig(x + h0 + pi)
ht = tanh(x + r * h0)
out["gru_gate_h"] = (1 - z) * h0 + z * ht + os * tanh(pi)
# lstm +cell: inner LSTM on pi from zero state
hs, cs = lstm(pi, 0.0, 0.0)
h0, c0 = 0.0, 0.0
f = sig(x + h0); fs = sig(x + hs)
i = sig(x + h0 + hs); g = tanh(x + h0 + hs); o = sig(x + h0 + hs)
c = f * c0 + fs * cs + i * g
out["lstm_cell_h"] = o * tanh(c); out["lstm_cell_c"] = c
# gru +cell: inner GRU on pi from zero state
hs = gru(pi, 0.0)
h0 = 1.0
z = sig(x + h0 + hs); r = sig(x + h0 + hs)
ht = tanh(x + r * (h0 + hs))
out["gru_cell_h"] = (1 - z) * h0 + z * ht
out["tanh_grad_0.3"] = 1 - tanh(0.3) ** 2
for k, v in out.items():
    print(f"{k} = {v:.17g}")
