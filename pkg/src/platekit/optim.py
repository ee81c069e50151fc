"""Gradient-descent update rules over ``Param`` lists.

State buffers are keyed by position in the parameter list, which is
stable for the containers in this package.
"""

import numpy as np

from .errors import CheckpointError, InvalidRangeError


class Optimizer:
    def __init__(self, params):
        self.params = list(params)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad[...] = 0.0

    def step(self) -> None:
        raise NotImplementedError

    def state_arrays(self) -> list:
        """(name, accumulator) pairs, in a stable order, for resumable
        training. Subclasses extend."""
        return []

    def state_scalars(self) -> dict:
        return {}

    def load_scalars(self, scalars: dict) -> None:
        pass


class SGD(Optimizer):
    def __init__(self, params, lr: float, momentum: float = 0.0):
        super().__init__(params)
        if lr <= 0:
            raise InvalidRangeError("learning rate must be positive")
        self.lr = lr
        self.momentum = momentum
        self.vel = [np.zeros_like(p.value) for p in self.params]

    def state_arrays(self):
        return [(f"vel.{i}", v) for i, v in enumerate(self.vel)]

    def step(self) -> None:
        for p, v in zip(self.params, self.vel):
            if self.momentum:
                v *= self.momentum
                v += p.grad
                p.value -= self.lr * v
            else:
                p.value -= self.lr * p.grad


class Adam(Optimizer):
    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        super().__init__(params)
        if lr <= 0:
            raise InvalidRangeError("learning rate must be positive")
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def state_arrays(self):
        return ([(f"m.{i}", a) for i, a in enumerate(self.m)]
                + [(f"v.{i}", a) for i, a in enumerate(self.v)])

    def state_scalars(self):
        return {"t": self.t}

    def load_scalars(self, scalars):
        self.t = int(scalars.get("t", 0))

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad ** 2
            p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class RMSProp(Optimizer):
    def __init__(self, params, lr: float, decay: float = 0.9, eps: float = 1e-8):
        super().__init__(params)
        if lr <= 0:
            raise InvalidRangeError("learning rate must be positive")
        self.lr, self.decay, self.eps = lr, decay, eps
        self.sq = [np.zeros_like(p.value) for p in self.params]

    def state_arrays(self):
        return [(f"sq.{i}", s) for i, s in enumerate(self.sq)]

    def step(self) -> None:
        for p, s in zip(self.params, self.sq):
            s *= self.decay
            s += (1.0 - self.decay) * p.grad ** 2
            p.value -= self.lr * p.grad / (np.sqrt(s) + self.eps)


class Adadelta(Optimizer):
    """Learning-rate-free rule: step size adapts from the running ratio
    of past update and gradient magnitudes."""

    def __init__(self, params, rho: float = 0.95, eps: float = 1e-6):
        super().__init__(params)
        if not 0.0 < rho < 1.0:
            raise InvalidRangeError("rho must lie in (0, 1)")
        self.rho, self.eps = rho, eps
        self.acc_g = [np.zeros_like(p.value) for p in self.params]
        self.acc_dx = [np.zeros_like(p.value) for p in self.params]

    def state_arrays(self):
        return ([(f"acc_g.{i}", a) for i, a in enumerate(self.acc_g)]
                + [(f"acc_dx.{i}", a) for i, a in enumerate(self.acc_dx)])

    def step(self) -> None:
        for p, ag, ad in zip(self.params, self.acc_g, self.acc_dx):
            ag *= self.rho
            ag += (1.0 - self.rho) * p.grad ** 2
            update = -np.sqrt(ad + self.eps) / np.sqrt(ag + self.eps) * p.grad
            ad *= self.rho
            ad += (1.0 - self.rho) * update ** 2
            p.value += update


def save_state(path: str, opt: Optimizer) -> None:
    """Accumulators as float64 blocks behind a text header, so a
    training run can resume exactly."""
    arrays = opt.state_arrays()
    with open(path, "wb") as fh:
        lines = ["platekit-optstate 1", f"rule {type(opt).__name__}"]
        for k, v in opt.state_scalars().items():
            lines.append(f"scalar {k} {v}")
        for name, arr in arrays:
            lines.append(f"state {name} {' '.join(map(str, arr.shape))}")
        lines.append("end")
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for _, arr in arrays:
            fh.write(arr.astype("<f8").tobytes())


def load_state(path: str, opt: Optimizer) -> None:
    with open(path, "rb") as fh:
        line = fh.readline().decode("ascii", "replace").strip()
        if line != "platekit-optstate 1":
            raise CheckpointError(f"{path}: bad magic line {line!r}")
        scalars, records = {}, []
        while True:
            raw = fh.readline()
            if not raw:
                raise CheckpointError(f"{path}: header ended without 'end'")
            line = raw.decode("ascii", "replace").strip()
            if line == "end":
                break
            kind, _, rest = line.partition(" ")
            if kind == "rule":
                if rest != type(opt).__name__:
                    raise CheckpointError(
                        f"{path}: state for {rest}, not {type(opt).__name__}")
            elif kind == "scalar":
                key, _, value = rest.partition(" ")
                scalars[key] = value
            elif kind == "state":
                parts = rest.split()
                records.append((parts[0], tuple(int(v) for v in parts[1:])))
        arrays = opt.state_arrays()
        if [(n, a.shape) for n, a in arrays] != records:
            raise CheckpointError(f"{path}: state records do not match optimizer")
        for _, arr in arrays:
            n = arr.size
            raw = fh.read(8 * n)
            if len(raw) != 8 * n:
                raise CheckpointError(f"{path}: truncated state block")
            arr[...] = np.frombuffer(raw, dtype="<f8").reshape(arr.shape)
        opt.load_scalars(scalars)
