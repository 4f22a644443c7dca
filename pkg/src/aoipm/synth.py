"""Deterministic generator of run-to-failure data in the 26-column format.

Produces train/test/truth files shaped like the NASA turbofan set: each unit
starts at a random wear state, degrades, and (in training data) runs to
failure.  The degradation model gives each unit its own healthy operating
point, a shared degradation-onset staircase of saturation stages, and a
failure signature in which every active sensor pegs at a saturation rail over
the final cycles; short mid-life fault episodes hit the same rail for a few
cycles before recovering.
Useful for end-to-end runs when the real dataset is not on disk.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

NUM_SENSORS = 21
NUM_CONSTANT = 7  # sensors with no temporal variation, dropped by preprocessing


@dataclass(frozen=True)
class SynthConfig:
    n_train: int = 100
    n_test: int = 100
    seed: int = 7
    life_min: int = 170
    life_max: int = 260
    onset_cycles: int = 30  # shared degradation staircase before failure
    onset_stages: int = 3  # number of discrete saturation stages in the onset
    fail_cycles: int = 12  # saturated failure signature at end of life
    healthy_noise: float = 0.003
    drift: float = 0.0
    fail_level: float = 4.0  # saturation rail, in normalized units
    max_episodes: int = 2  # transient mid-life fault episodes in training units
    episode_len_range: tuple = (20, 30)
    n_short_test: int = 5  # heavily truncated test units with an early transient
    short_len_range: tuple = (55, 75)
    short_spike_cycle_range: tuple = (33, 40)
    test_rul_near: tuple = (5, 35)  # most test units stop close to failure
    test_rul_far: tuple = (45, 100)
    far_test_fraction: float = 0.2


class _SensorBank:
    """Fixed per-sensor cosmetics: which are constant, gains and offsets."""

    def __init__(self, rng):
        order = rng.permutation(NUM_SENSORS)
        self.constant = np.sort(order[:NUM_CONSTANT])
        self.const_values = np.round(rng.uniform(0.0, 100.0, NUM_SENSORS), 2)
        self.base = rng.uniform(100.0, 1500.0, NUM_SENSORS)
        gains = rng.uniform(5.0, 15.0, NUM_SENSORS)
        signs = np.where(rng.random(NUM_SENSORS) < 0.25, -1.0, 1.0)
        self.gain = gains * signs


def _simulate_unit(rng, cfg, bank, total_life, spike_cycles):
    """Latent (total_life, 21) trajectory in normalized units, then cosmetics."""
    T = total_life
    G, F = cfg.onset_cycles, cfg.fail_cycles
    active = [j for j in range(NUM_SENSORS) if j not in bank.constant]
    offsets = rng.normal(0.0, 1.0, len(active))
    latent = np.empty((T, NUM_SENSORS))
    damage = (np.arange(1, T + 1) / T) ** 2
    for col, j in enumerate(active):
        healthy = offsets[col] + cfg.drift * damage + rng.normal(0.0, cfg.healthy_noise, T)
        vals = healthy.copy()
        # Saturation: the onset climbs a shared staircase of exact plateau
        # levels and the final cycles peg at the rail, so degraded rows repeat
        # verbatim across cycles and units.
        onset_start = T - G - F
        K = cfg.onset_stages
        for t in range(onset_start, T - F):
            stage = (t - onset_start) * K // G + 1
            vals[t] = cfg.fail_level * stage / (K + 1)
        vals[T - F:] = cfg.fail_level
        if isinstance(spike_cycles, dict):
            for t, level in spike_cycles.items():
                vals[t] = level
        else:
            for t in spike_cycles:
                vals[t] = cfg.fail_level
        latent[:, j] = vals
    for j in bank.constant:
        latent[:, j] = 0.0
    out = bank.base[None, :] + bank.gain[None, :] * latent
    out[:, bank.constant] = bank.const_values[bank.constant][None, :]
    return out


def _episode_cycles(rng, cfg, total_life):
    """Transient fault episodes as {cycle: pegged level}, kept clear of the
    baseline window at the start of life and of the onset staircase at its
    end.  Each episode pegs at one of the shared saturation levels."""
    lo = 110
    hi = int(0.62 * total_life)
    episodes = {}
    if hi <= lo:
        return episodes
    K = cfg.onset_stages
    for _ in range(int(rng.integers(0, cfg.max_episodes + 1))):
        start = int(rng.integers(lo, hi))
        length = int(rng.integers(cfg.episode_len_range[0], cfg.episode_len_range[1] + 1))
        level = cfg.fail_level * int(rng.integers(1, K + 2)) / (K + 1)
        for t in range(start, min(start + length, hi)):
            episodes[t] = level
    return episodes


def generate(cfg):
    """(train_rows, test_rows, true_ruls): 26-column arrays plus per-unit RUL."""
    rng = np.random.default_rng(cfg.seed)
    bank = _SensorBank(rng)

    def rows_for(unit, sensors, length):
        n = length
        settings = rng.normal(0.0, 0.001, (n, 3)) + np.array([0.0023, 0.0, 100.0])
        cols = [
            np.full((n, 1), unit),
            np.arange(1, n + 1)[:, None],
            settings,
            sensors[:n],
        ]
        return np.hstack(cols)

    train_rows = []
    for unit in range(1, cfg.n_train + 1):
        T = int(rng.integers(cfg.life_min, cfg.life_max + 1))
        spikes = _episode_cycles(rng, cfg, T)
        sensors = _simulate_unit(rng, cfg, bank, T, spikes)
        train_rows.append(rows_for(unit, sensors, T))

    test_rows, ruls = [], []
    for unit in range(1, cfg.n_test + 1):
        T = int(rng.integers(cfg.life_min, cfg.life_max + 1))
        if unit <= cfg.n_short_test:
            length = int(rng.integers(*cfg.short_len_range))
            spike_at = int(rng.integers(*cfg.short_spike_cycle_range))
            spikes = [spike_at - 1, spike_at]
        else:
            if rng.random() < cfg.far_test_fraction:
                rul = int(rng.integers(*cfg.test_rul_far))
            else:
                rul = int(rng.integers(*cfg.test_rul_near))
            length = max(120, T - rul)
            spikes = []
        sensors = _simulate_unit(rng, cfg, bank, T, spikes)
        test_rows.append(rows_for(unit, sensors, length))
        ruls.append(T - length)

    return np.vstack(train_rows), np.vstack(test_rows), ruls


def write_fd_files(cfg, out_dir, tag="FD001"):
    """Write train_/test_/RUL_ files; returns the three paths."""
    train, test, ruls = generate(cfg)
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    def dump(name, rows):
        path = os.path.join(out_dir, name)
        with open(path, "w") as fh:
            for row in rows:
                unit, cycle = int(row[0]), int(row[1])
                rest = " ".join(f"{v:.4f}" for v in row[2:])
                fh.write(f"{unit} {cycle} {rest}\n")
        return path

    paths["train"] = dump(f"train_{tag}.txt", train)
    paths["test"] = dump(f"test_{tag}.txt", test)
    rul_path = os.path.join(out_dir, f"RUL_{tag}.txt")
    with open(rul_path, "w") as fh:
        fh.write("\n".join(str(r) for r in ruls) + "\n")
    paths["rul"] = rul_path
    return paths
