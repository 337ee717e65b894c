"""
Checking backpropagation by finite differences
==============================================

Every layer computes its own gradients. Here they are compared with
central differences on a small conv1fc model.
"""
import numpy as np

from spxnet import build_model, mse_loss

model = build_model("conv1fc", seed=0)
print(model.count_params(), "parameters")
for layer in model.layers:
    print(" ", layer.config())

rng = np.random.default_rng(0)
x = rng.normal(size=(4, 14, 2))
y = rng.uniform(0.5, 1.5, size=(4, 1))
model.layers[-1].params["b"][...] = 1.0

loss, dpred = mse_loss(model.forward(x), y)
grads = {k: g.copy() for k, g in model.backward(dpred).items()}

eps = 1e-6
for key, p in model.parameters().items():
    numeric = np.zeros_like(p)
    for idx in np.ndindex(p.shape):
        old = p[idx]
        p[idx] = old + eps
        up = mse_loss(model.predict(x), y)[0]
        p[idx] = old - eps
        down = mse_loss(model.predict(x), y)[0]
        p[idx] = old
        numeric[idx] = (up - down) / (2 * eps)
    err = np.linalg.norm(grads[key] - numeric) / (np.linalg.norm(grads[key]) + np.linalg.norm(numeric))
    print(f"{key:<6} {str(p.shape):<12} relative error {err:.1e}")
