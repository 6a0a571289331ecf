"""Train the bundled AOA/SA LSTM on simulated flights.

Offline tool; needs ``torch`` (not a package dependency).  Writes the
weights in the ``uavnav-lstm`` JSON format::

    python scripts/train_lstm.py --out src/uavnav/data/lstm_default.json
"""

import argparse
import math

import numpy as np
import torch

from uavnav.airdata import FEATURES, LOW_SPEED_GATE, AirframeParams, LstmWeights, equivalent_coefficients
from uavnav.airdata import save_lstm_weights
from uavnav.simulator import Rates, Scenario, Segment, WindSpec, simulate

DEG = math.pi / 180.0
GATES = ("i", "f", "o", "g")  # torch stacks i, f, g, o


def training_scenario(seed):
    rng = np.random.default_rng(seed)
    segs = []
    for _ in range(8):
        kind = rng.choice(["cruise", "turn", "climb", "descend"])
        segs.append(
            Segment(
                str(kind),
                float(rng.uniform(8, 20)),
                speed=float(rng.uniform(15, 25)),
                turn_rate=float(rng.uniform(-0.15, 0.15)) if kind == "turn" else 0.0,
                climb_rate=float(rng.uniform(0.5, 2.5)) if kind in ("climb", "descend") else 0.0,
            )
        )
    return Scenario(
        seed=seed,
        segments=tuple(segs),
        rates=Rates(imu=100, gnss=5, baro=20, mag=20, pitot=20, aero=20),
        wind=WindSpec(tuple(rng.uniform(-3, 3, 2)) + (0.0,), 0.02),
        alpha_excitation=float(rng.uniform(0.5, 2.0)) * DEG,
        beta_excitation=float(rng.uniform(0.5, 2.0)) * DEG,
        excitation_period=float(rng.uniform(4, 10)),
        start_height=200.0,
    )


def feature_rows(sim, af):
    """Per aero event: features from the sensor stream, truth targets."""
    rows, targets = [], []
    imu = tas = None
    for ev in sim.events:
        kind = ev.kind
        if kind == "IMU":
            imu = ev.payload
        elif kind == "TAS":
            tas = ev.payload.V_TAS
        elif kind == "AERO" and imu is not None and tas is not None and tas > LOW_SPEED_GATE:
            k = int(round(ev.t / sim.scenario.dt))
            R_ab = sim.truth[k].state.R_ab
            C_L, C_Y, _ = equivalent_coefficients(imu.accel, imu.omega, tas, af, R_ab)
            p, q, r = imu.omega
            a = ev.payload
            rows.append((C_L, C_Y, p, q, r, a.delta_e, a.delta_r, tas))
            targets.append((a.alpha_true, a.beta_true))
    return np.array(rows), np.array(targets)


def windows(X, Y, n):
    idx = np.arange(n, len(X) + 1)
    return np.stack([X[i - n : i] for i in idx]), Y[idx - 1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--flights", type=int, default=24)
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--seq-len", type=int, default=10)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    af = AirframeParams()
    data = [feature_rows(simulate(training_scenario(1000 + i)), af) for i in range(args.flights)]
    mean = np.concatenate([d[0] for d in data]).mean(axis=0)
    scale = np.concatenate([d[0] for d in data]).std(axis=0) + 1e-9
    sets = [windows((X - mean) / scale, Y, args.seq_len) for X, Y in data]
    n_val = max(1, args.flights // 6)
    Xtr = torch.tensor(np.concatenate([s[0] for s in sets[n_val:]]), dtype=torch.float32)
    Ytr = torch.tensor(np.concatenate([s[1] for s in sets[n_val:]]), dtype=torch.float32)
    Xva = torch.tensor(np.concatenate([s[0] for s in sets[:n_val]]), dtype=torch.float32)
    Yva = torch.tensor(np.concatenate([s[1] for s in sets[:n_val]]), dtype=torch.float32)

    lstm = torch.nn.LSTM(len(FEATURES), args.hidden, batch_first=True)
    head = torch.nn.Linear(args.hidden, 2)
    opt = torch.optim.Adam(list(lstm.parameters()) + list(head.parameters()), lr=3e-3)
    sched = torch.optim.lr_scheduler.StepLR(opt, step_size=20, gamma=0.3)

    def predict(X):
        out, _ = lstm(X)
        return head(out[:, -1])

    for epoch in range(args.epochs):
        perm = torch.randperm(len(Xtr))
        for i in range(0, len(Xtr), 256):
            b = perm[i : i + 256]
            loss = torch.mean((predict(Xtr[b]) - Ytr[b]) ** 2)
            opt.zero_grad()
            loss.backward()
            opt.step()
        sched.step()
        if epoch % 10 == 9 or epoch == args.epochs - 1:
            with torch.no_grad():
                rmse = torch.sqrt(torch.mean((predict(Xva) - Yva) ** 2, dim=0)).numpy() / DEG
            print(f"epoch {epoch + 1}: validation RMSE alpha {rmse[0]:.3f} deg, beta {rmse[1]:.3f} deg")

    H = args.hidden
    Wih = lstm.weight_ih_l0.detach().double().numpy()
    Whh = lstm.weight_hh_l0.detach().double().numpy()
    bias = (lstm.bias_ih_l0 + lstm.bias_hh_l0).detach().double().numpy()
    order = {"i": 0, "f": 1, "g": 2, "o": 3}
    w = LstmWeights(
        W={g: Wih[order[g] * H : (order[g] + 1) * H] for g in GATES},
        U={g: Whh[order[g] * H : (order[g] + 1) * H] for g in GATES},
        b={g: bias[order[g] * H : (order[g] + 1) * H] for g in GATES},
        readout_W=head.weight.detach().double().numpy(),
        readout_b=head.bias.detach().double().numpy(),
        feature_mean=mean,
        feature_scale=scale,
        seq_len=args.seq_len,
    )
    save_lstm_weights(w, args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
