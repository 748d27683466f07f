"""Trainable denoiser: an MLP noise predictor fit by denoising score matching.

Forward and reverse passes are written out by hand (no autograd), as is the
adaptive-moment optimizer, so parameter gradients can be audited against
finite differences. The net predicts the noise eps from (x_t, t); the score
estimate is -eps_hat / sigma(t).

Time conditioning: sinusoidal features of the normalized log noise level
u = (log sigma(t) - log sigma_min) / (log sigma_max - log sigma_min). The
state input is scaled by 1 / sqrt(m^2 + sigma^2) so the net sees
unit-variance inputs at every noise level (training data is assumed
whitened); the output is the noise estimate itself, which is unit-scale
by construction.
"""

import json
import os

import numpy as np

from .errors import TrainingFailureError
from .io import read_matrix, write_matrix
from .schedules import NoiseSchedule
from .validation import check_training_set


def _silu(z):
    s = 1.0 / (1.0 + np.exp(-z))
    return z * s


def _silu_grad(z):
    s = 1.0 / (1.0 + np.exp(-z))
    return s * (1.0 + z * (1.0 - s))


class DenoisingScoreNet:
    """MLP noise predictor with hand-derived gradients.

    Parameters
    ----------
    hidden : widths of the hidden layers.
    n_freqs : number of sinusoidal frequency pairs in the time embedding.
    schedule : NoiseSchedule (default variance-exploding).
    learning_rate, batch_size, clip_norm : optimizer settings.
    seed : drives initialization and all training draws.
    """

    def __init__(
        self,
        hidden=(256, 256, 256),
        n_freqs=8,
        schedule=None,
        learning_rate=1e-4,
        batch_size=64,
        clip_norm=10.0,
        seed=0,
    ):
        self.hidden = tuple(hidden)
        self.n_freqs = int(n_freqs)
        self.schedule = schedule
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.clip_norm = clip_norm
        self.seed = seed

    # --- architecture -------------------------------------------------------

    @property
    def n_time_features(self):
        return 2 * self.n_freqs

    def _time_features(self, sigma):
        sched = self.schedule_
        u = np.log(np.asarray(sigma, dtype=float) / sched.sigma_min) / np.log(
            sched.sigma_max / sched.sigma_min
        )
        u = np.atleast_1d(u)[:, None]
        freqs = 2.0 ** np.arange(self.n_freqs)
        phase = 2.0 * np.pi * u * freqs
        return np.concatenate([np.sin(phase), np.cos(phase)], axis=1)

    def _init_params(self, rng, dim):
        sizes = [dim + self.n_time_features, *self.hidden, dim]
        params = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w = rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in)
            b = np.zeros(fan_out)
            params.append([w, b])
        return params

    def _forward(self, inp, keep_cache=False):
        h = inp
        cache = [(None, h)]
        for w, b in self.params_[:-1]:
            z = h @ w.T + b
            h = _silu(z)
            cache.append((z, h))
        w, b = self.params_[-1]
        out = h @ w.T + b
        return (out, cache) if keep_cache else out

    def _backward(self, dout, cache):
        """Gradients of a scalar loss given d(loss)/d(output); dout is (B, d)."""
        grads = [None] * len(self.params_)
        w_last, _ = self.params_[-1]
        grads[-1] = [dout.T @ cache[-1][1], dout.sum(axis=0)]
        dh = dout @ w_last
        for layer in range(len(self.params_) - 2, -1, -1):
            z, _ = cache[layer + 1]
            dz = dh * _silu_grad(z)
            grads[layer] = [dz.T @ cache[layer][1], dz.sum(axis=0)]
            if layer > 0:
                dh = dz @ self.params_[layer][0]
        return grads

    # --- loss ----------------------------------------------------------------

    def _batch_input(self, x0, t, eps):
        """Net input for noised states, scaled to unit variance per noise level."""
        sig = np.atleast_1d(self.schedule_.sigma(t))
        m = np.atleast_1d(self.schedule_.m(t))
        c = np.sqrt(m**2 + sig**2)
        xt = m[:, None] * x0 + sig[:, None] * eps
        return np.concatenate([xt / c[:, None], self._time_features(sig)], axis=1)

    def dsm_loss(self, x0, t, eps):
        """Mean over the batch of ||eps_hat - eps||^2 for given draws."""
        pred = self._forward(self._batch_input(x0, t, eps))
        return float(np.mean(np.sum((pred - eps) ** 2, axis=1)))

    def loss_and_grads(self, x0, t, eps):
        inp = self._batch_input(x0, t, eps)
        pred, cache = self._forward(inp, keep_cache=True)
        diff = pred - eps
        loss = float(np.mean(np.sum(diff**2, axis=1)))
        return loss, self._backward(2.0 * diff / x0.shape[0], cache)

    # --- training --------------------------------------------------------------

    def fit(self, X, steps=20_000, y=None):
        X = check_training_set(X)
        self.dim = X.shape[1]
        self.schedule_ = (
            self.schedule if self.schedule is not None else NoiseSchedule.variance_exploding()
        )
        if steps < 1:
            raise ValueError("steps must be >= 1")
        rng = np.random.default_rng(self.seed)
        self.params_ = self._init_params(rng, self.dim)
        adam_m = [[np.zeros_like(p) for p in lp] for lp in self.params_]
        adam_v = [[np.zeros_like(p) for p in lp] for lp in self.params_]
        beta1, beta2, eps_adam = 0.9, 0.999, 1e-8
        trace = np.empty(steps)
        n = X.shape[0]
        for step in range(steps):
            idx = rng.integers(0, n, self.batch_size)
            t = rng.random(self.batch_size)
            noise = rng.standard_normal((self.batch_size, self.dim))
            loss, grads = self.loss_and_grads(X[idx], t, noise)
            if not np.isfinite(loss):
                raise TrainingFailureError(f"non-finite loss at step {step}", step)
            total = np.sqrt(sum(float(np.sum(g**2)) for lg in grads for g in lg))
            scale = min(1.0, self.clip_norm / total) if total > 0 else 1.0
            bc1 = 1.0 - beta1 ** (step + 1)
            bc2 = 1.0 - beta2 ** (step + 1)
            for lp, lg, lm, lv in zip(self.params_, grads, adam_m, adam_v):
                for p, g, m_, v_ in zip(lp, lg, lm, lv):
                    g = g * scale
                    m_ += (1.0 - beta1) * (g - m_)
                    v_ += (1.0 - beta2) * (g**2 - v_)
                    p -= self.learning_rate * (m_ / bc1) / (np.sqrt(v_ / bc2) + eps_adam)
            if not all(np.isfinite(p).all() for lp in self.params_ for p in lp):
                raise TrainingFailureError(f"non-finite parameters at step {step}", step)
            trace[step] = loss
        self.loss_trace_ = trace
        self.steps_ = steps
        return self

    # --- inference ---------------------------------------------------------------

    def predict_noise(self, x, t):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        sig = float(self.schedule_.sigma(t))
        m = float(self.schedule_.m(t))
        c = np.sqrt(m**2 + sig**2)
        feats = np.repeat(self._time_features(sig), xb.shape[0], axis=0)
        pred = self._forward(np.concatenate([xb / c, feats], axis=1))
        return pred[0] if single else pred

    def score(self, x, t):
        """Score estimate -eps_hat(x, t) / sigma(t); drop-in for the mixture prior."""
        return -self.predict_noise(x, t) / float(self.schedule_.sigma(t))

    # --- persistence -----------------------------------------------------------------

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        meta = {
            "dim": self.dim,
            "hidden": list(self.hidden),
            "n_freqs": self.n_freqs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "clip_norm": self.clip_norm,
            "seed": self.seed,
            "steps": getattr(self, "steps_", 0),
            "schedule": self.schedule_.to_dict(),
        }
        with open(os.path.join(out_dir, "net_meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2)
        for i, (w, b) in enumerate(self.params_):
            write_matrix(os.path.join(out_dir, f"net_w{i}.mpst"), w)
            write_matrix(os.path.join(out_dir, f"net_b{i}.mpst"), b)
        write_matrix(os.path.join(out_dir, "net_loss_trace.mpst"), self.loss_trace_)

    @classmethod
    def load(cls, out_dir):
        with open(os.path.join(out_dir, "net_meta.json")) as fh:
            meta = json.load(fh)
        net = cls(
            hidden=tuple(meta["hidden"]),
            n_freqs=meta["n_freqs"],
            schedule=NoiseSchedule.from_dict(meta["schedule"]),
            learning_rate=meta["learning_rate"],
            batch_size=meta["batch_size"],
            clip_norm=meta["clip_norm"],
            seed=meta["seed"],
        )
        net.dim = meta["dim"]
        net.schedule_ = net.schedule
        net.steps_ = meta["steps"]
        n_layers = len(meta["hidden"]) + 1
        net.params_ = [
            [
                read_matrix(os.path.join(out_dir, f"net_w{i}.mpst")),
                read_matrix(os.path.join(out_dir, f"net_b{i}.mpst")),
            ]
            for i in range(n_layers)
        ]
        net.loss_trace_ = read_matrix(os.path.join(out_dir, "net_loss_trace.mpst"))
        return net

    # --- parameter plumbing for gradient audits ------------------------------

    def get_flat_params(self):
        return np.concatenate([p.ravel() for lp in self.params_ for p in lp])

    def set_flat_params(self, flat):
        offset = 0
        for lp in self.params_:
            for i, p in enumerate(lp):
                lp[i] = flat[offset : offset + p.size].reshape(p.shape).copy()
                offset += p.size
        if offset != flat.size:
            raise ValueError(f"expected {offset} parameters, got {flat.size}")
