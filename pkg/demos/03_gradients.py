# # Reverse-mode gradients, checked numerically
#
# The model runs on a small tape-based autodiff engine over numpy arrays.
# Every operation records how to push a gradient back to its inputs;
# `backward` walks the tape once and then frees it.

import numpy as np

from deepgg import HyperParams, ModelParams, teacher_forced_loss
from deepgg import autodiff as ad
from deepgg.autodiff import StaleGraphError, Tensor, backward
from deepgg.sequences import ConstructionSequence

x = Tensor(3.0, requires_grad=True)
y = x * x
backward(y)
print("d(x^2)/dx at 3:", x.grad)

try:
    backward(y)
except StaleGraphError as exc:
    print("second backward:", exc)

# A GRU step with hand-picked weights: only the update gate and the
# candidate see the input, so the result can be checked by hand.

I, Z, z = np.eye(2), np.zeros((2, 2)), np.zeros(2)
gru = {k: Tensor(v) for k, v in dict(W_z=I, U_z=Z, b_z=z, W_r=Z, U_r=Z, b_r=z, W_h=I, U_h=I, b_h=z).items()}
print("GRU step:", ad.gru_cell(Tensor([1.0, 0.0]), Tensor([0.5, -0.5]), gru).value)

# ## Whole-model check
#
# Perturb each of a few parameters by ±h and compare the central difference
# of the teacher-forced loss with the analytic gradient.

rng = np.random.default_rng(3)
hp = HyperParams(h_v=4, h_e=3, h_g=6, h_r=3, h_msg=5)
params = ModelParams.initialize(hp, rng)
seq = ConstructionSequence.parse("N N E 1 0 N E 2 0 E 2 1 N E 3 1")

backward(teacher_forced_loss(params, seq))
h = 1e-6
# choice weights on h_g or the context vertex shift every vertex's score
# equally and get zero gradient, so pick a column in the h_v block
for name, idx in (("gru.U_z", (1, 3)), ("conv.W", (2, 4)), ("choice.target.W", (0, 7)),
                  ("transition.add_edge.b", (0,))):
    t = params[name]
    analytic = t.grad[idx]
    old = t.value[idx]
    t.value[idx] = old + h
    up = teacher_forced_loss(params.frozen(), seq).item()
    t.value[idx] = old - h
    down = teacher_forced_loss(params.frozen(), seq).item()
    t.value[idx] = old
    numeric = (up - down) / (2 * h)
    print(f"{name:22s}{str(idx):10s} analytic {analytic:+.8f} numeric {numeric:+.8f}")
