import logging
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from src.errors import ModelSpecError, SimulationDivergedError
from src.model.ensemble import PathEnsemble, SeedManifest
from src.model.streams import DEFAULT_BLOCK_SIZE, PathStreams

logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e6


class PathSimulator:
    """
    Euler-Maruyama simulation of a ProcessSpec under the reference measure.

    Jumps arrive with exact Poisson counts per step and are compensated with
    the rate times the mean jump size evaluated at the left end of the step.
    """

    def __init__(self, spec, n_steps, n_paths, seed, block_size=DEFAULT_BLOCK_SIZE, workers=1):
        """
        Initialize the simulator.

        Args:
            spec (ProcessSpec): Reference model
            n_steps (int): Number of Euler steps
            n_paths (int): Number of paths
            seed (int): Base seed of the counter-based streams
            block_size (int): Paths per random substream
            workers (int): Threads used to simulate blocks concurrently
        """
        if int(n_steps) < 1:
            raise ModelSpecError(f"n_steps must be at least 1, got {n_steps}")
        if int(n_paths) < 1:
            raise ModelSpecError(f"n_paths must be at least 1, got {n_paths}")
        self.spec = spec
        self.n_steps = int(n_steps)
        self.n_paths = int(n_paths)
        self.seed = int(seed)
        self.block_size = int(block_size)
        self.workers = max(1, int(workers))
        self.streams = None
        self.times = None
        self.dt = None
        self.jump_laws = None
        self.mark_etas = {}
        self.results = None

    def setup(self):
        """Prepare the time grid, random streams and jump laws."""
        self.streams = PathStreams(self.seed, self.block_size)
        self.times = np.linspace(0.0, self.spec.horizon, self.n_steps + 1)
        self.dt = self.spec.horizon / self.n_steps
        self.bound = DIVERGENCE_FACTOR * (1.0 + float(np.max(np.abs(self.spec.initial_state))))
        self.jump_laws = [self.jump_law(index, component)
                          for index, component in enumerate(self.spec.jumps)]

    def jump_law(self, index, component):
        """
        Arrival rate and mark law used to sample a jump component.

        Returns:
            tuple: (rate, frozen mark distribution)
        """
        return component.rate, component.marks

    def drift_control(self, t, x):
        """Drift control λ(t, x) of shape (N, m), or None under the reference measure."""
        return None

    @property
    def tracks_density(self):
        return False

    def draw_block(self, rng):
        """
        Draw all randomness for one full block of paths.

        The draw order is fixed (Brownian increments, then counts and marks of
        each jump component) so a block is reproducible from its substream.
        """
        shape = (self.block_size, self.n_steps)
        normals = rng.standard_normal(shape + (self.spec.dim_bm,))
        arrivals = []
        for rate, marks in self.jump_laws:
            counts = rng.poisson(rate * self.dt, size=shape)
            depth = int(counts.max())
            if depth:
                drawn = np.asarray(marks.rvs(size=shape + (depth,), random_state=rng), dtype=float)
            else:
                drawn = np.zeros(shape + (0,))
            arrivals.append((counts, drawn))
        return normals, arrivals

    def simulate_block(self, block):
        """
        Simulate the requested paths of one block.

        Returns:
            tuple: (states of shape (rows, K+1, n), log densities or None)
        """
        rows = self.streams.block_rows(block, self.n_paths)
        normals, arrivals = self.draw_block(self.streams.generator(block))

        x = np.tile(self.spec.initial_state, (rows, 1))
        states = np.empty((rows, self.n_steps + 1, self.spec.dim_state))
        states[:, 0, :] = x
        log_density = np.zeros(rows) if self.tracks_density else None
        sqrt_dt = np.sqrt(self.dt)

        for k in range(self.n_steps):
            t = self.times[k]
            dw = sqrt_dt * normals[:rows, k, :]
            sigma = np.asarray(self.spec.diffusion(t, x), dtype=float)
            increment = np.asarray(self.spec.drift(t, x), dtype=float) * self.dt

            control = self.drift_control(t, x)
            if control is not None:
                if not np.all(np.isfinite(control)):
                    raise SimulationDivergedError(k, block * self.block_size + int(
                        np.argmax(~np.all(np.isfinite(control), axis=1))))
                increment = increment - np.einsum('pnm,pm->pn', sigma, control) * self.dt
                log_density += -np.sum(control * dw, axis=1) + 0.5 * np.sum(control ** 2, axis=1) * self.dt

            increment = increment + np.einsum('pnm,pm->pn', sigma, dw)

            for index, (component, (counts, marks)) in enumerate(zip(self.spec.jumps, arrivals)):
                step_counts = counts[:rows, k]
                for arrival in range(int(step_counts.max())):
                    hit = step_counts > arrival
                    z = marks[:rows, k, arrival][hit]
                    increment[hit] += component.jump(t, x[hit], z)
                    if index in self.mark_etas:
                        log_density[hit] -= self.mark_etas[index] * z
                increment = increment - component.rate * component.mean_jump(t, x) * self.dt

            x = x + increment
            bad = ~np.all(np.isfinite(x), axis=1) | np.any(np.abs(x) > self.bound, axis=1)
            if np.any(bad):
                raise SimulationDivergedError(k + 1, block * self.block_size + int(np.argmax(bad)))
            states[:, k + 1, :] = x

        if log_density is not None:
            for index, eta in self.mark_etas.items():
                tilted_rate, _ = self.jump_laws[index]
                log_density += (self.spec.jumps[index].rate - tilted_rate) * self.spec.horizon
        return states, log_density

    def run_simulation(self):
        """
        Simulate all paths.

        Returns:
            PathEnsemble: The simulated ensemble
        """
        self.setup()
        start_time = time.time()
        n_blocks = self.streams.num_blocks(self.n_paths)
        progress_interval = max(n_blocks // 20, 1)

        def run(block):
            outcome = self.simulate_block(block)
            if (block + 1) % progress_interval == 0:
                logger.debug("Simulated block %d/%d (%.1fs)", block + 1, n_blocks,
                             time.time() - start_time)
            return outcome

        if self.workers > 1 and n_blocks > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                outcomes = list(pool.map(run, range(n_blocks)))
        else:
            outcomes = [run(block) for block in range(n_blocks)]

        states = np.concatenate([states for states, _ in outcomes], axis=0)
        log_density = None
        if self.tracks_density:
            log_density = np.concatenate([density for _, density in outcomes])

        manifest = SeedManifest(self.seed, self.block_size, self.streams.path_ids(self.n_paths))
        ensemble = PathEnsemble(self.times, states, manifest, log_density)
        self.results = {
            'ensemble': ensemble,
            'simulation_time': time.time() - start_time,
        }
        logger.info("Simulated %d paths x %d steps in %.2fs", self.n_paths, self.n_steps,
                    self.results['simulation_time'])
        return ensemble

    def get_results_summary(self):
        """
        Get a formatted summary of the last simulation.

        Returns:
            str: Formatted summary
        """
        if not self.results:
            return "No simulation results available."
        terminal = self.results['ensemble'].terminal
        lines = [
            "Simulation Results Summary",
            "==========================",
            "",
            f"Paths: {self.n_paths}",
            f"Steps: {self.n_steps} (dt = {self.dt:.6g})",
            f"Seed: {self.seed}",
            f"Simulation time: {self.results['simulation_time']:.2f} seconds",
            "",
        ]
        for coordinate in range(terminal.shape[1]):
            lines.append(f"X_T[{coordinate}]: mean {terminal[:, coordinate].mean():.6f}, "
                         f"std {terminal[:, coordinate].std(ddof=1) if len(terminal) > 1 else 0.0:.6f}")
        return "\n".join(lines)


def simulate_paths(spec, n_steps, n_paths, seed, **kwargs):
    """Simulate ``n_paths`` paths of ``spec`` under the reference measure."""
    return PathSimulator(spec, n_steps, n_paths, seed, **kwargs).run_simulation()
