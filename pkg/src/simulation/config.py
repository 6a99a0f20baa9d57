import json

from src.errors import ConfigError

MODELS = ("brownian", "ou", "fitted")
ENGINES = ("mc", "pde")
SECTIONS = ("model", "engine", "simulation", "solver", "grid", "report")


class RunConfig:
    """
    Configuration settings for a stress run.
    """

    def __init__(self,
                 model="ou",
                 model_params=None,
                 model_file=None,
                 series_file=None,
                 n_bins=40,
                 x0=0.0,
                 horizon=1.0,
                 engine="mc",
                 constraints=None,
                 n_paths=100000,
                 n_steps=200,
                 seed=12345,
                 block_size=1024,
                 tol=None,
                 max_iter=100,
                 max_outer=50,
                 grid_n_x=401,
                 grid_n_t=400,
                 grid_stds=8.0,
                 theta=0.5,
                 smoothing=True,
                 histogram_bins=50,
                 out_dir="results"):
        """
        Initialize run configuration.

        Args:
            model (str): Reference model: "brownian", "ou" or "fitted"
            model_params (dict): Parameters of a built-in model (sigma, drift for
                "brownian"; theta, mean, sigma for "ou")
            model_file (str): Fitted-model CSV used when model is "fitted"
            series_file (str): Price CSV fitted on the fly when model is "fitted"
                and no model_file is given
            n_bins (int): Number of bins when fitting a series
            x0 (float): Initial state in normalised units
            horizon (float): Time horizon T
            engine (str): "mc" for sample tilting, "pde" for the grid engine
            constraints (list): Constraint requests such as "var(level=0.9,shift=+10%)"
            n_paths (int): Number of simulated paths
            n_steps (int): Euler steps per path
            seed (int): Base seed of the path substreams
            block_size (int): Paths per random substream
            tol (float): Solver tolerance; engine default when None
            max_iter (int): Newton iterations of the sample solver
            max_outer (int): Outer iterations of the grid engine
            grid_n_x (int): Spatial nodes of the grid
            grid_n_t (int): Time steps of the grid
            grid_stds (float): Half-width of the grid in reference standard deviations
            theta (float): Time-stepping weight (0.5 Crank-Nicolson, 1 implicit)
            smoothing (bool): Smooth indicator constraints over two grid cells
            histogram_bins (int): Bins of the exported histograms
            out_dir (str): Directory for report artifacts
        """
        self.model = model
        self.model_params = dict(model_params or {})
        self.model_file = model_file
        self.series_file = series_file
        self.n_bins = n_bins
        self.x0 = x0
        self.horizon = horizon
        self.engine = engine
        self.constraints = list(constraints or [])
        self.n_paths = n_paths
        self.n_steps = n_steps
        self.seed = seed
        self.block_size = block_size
        self.tol = tol
        self.max_iter = max_iter
        self.max_outer = max_outer
        self.grid_n_x = grid_n_x
        self.grid_n_t = grid_n_t
        self.grid_stds = grid_stds
        self.theta = theta
        self.smoothing = smoothing
        self.histogram_bins = histogram_bins
        self.out_dir = out_dir

    def validate(self):
        """
        Check the settings that are not validated downstream.

        Raises:
            ConfigError: On an unknown model or engine or a non-positive count
        """
        if self.model not in MODELS:
            raise ConfigError(f"Unknown model '{self.model}'; expected one of {', '.join(MODELS)}")
        if self.engine not in ENGINES:
            raise ConfigError(f"Unknown engine '{self.engine}'; expected one of {', '.join(ENGINES)}")
        if self.model == "fitted" and not (self.model_file or self.series_file):
            raise ConfigError("A fitted model needs a model_file or a series_file")
        for name in ("n_paths", "n_steps", "block_size", "max_iter", "max_outer", "histogram_bins"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.5 <= float(self.theta) <= 1.0:
            raise ConfigError(f"theta must lie in [0.5, 1], got {self.theta}")
        if not float(self.horizon) > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        return self

    def __str__(self):
        """String representation of the configuration."""
        if self.model == "fitted":
            source = self.model_file or f"fit of {self.series_file} ({self.n_bins} bins)"
            model_str = f"fitted ({source})"
        else:
            params = ", ".join(f"{key}={value}" for key, value in sorted(self.model_params.items()))
            model_str = f"{self.model} ({params or 'defaults'})"
        constraints_str = "; ".join(self.constraints) if self.constraints else "None"
        tol_str = "engine default" if self.tol is None else f"{self.tol:g}"

        return (f"Run Config:\n"
                f"  Model: {model_str}\n"
                f"  x0: {self.x0}, horizon: {self.horizon}\n"
                f"  Engine: {self.engine}\n"
                f"  Constraints: {constraints_str}\n"
                f"  Paths: {self.n_paths} x {self.n_steps} steps (seed {self.seed})\n"
                f"  Tolerance: {tol_str}\n"
                f"  Grid: {self.grid_n_x} x {self.grid_n_t}, theta {self.theta}\n"
                f"  Output directory: {self.out_dir}")

    def to_dict(self):
        """
        Convert configuration to a nested dictionary for serialization.

        Returns:
            dict: One entry per section
        """
        return {
            'model': {
                'name': self.model,
                'params': dict(sorted(self.model_params.items())),
                'file': self.model_file,
                'series': self.series_file,
                'n_bins': self.n_bins,
                'x0': self.x0,
                'horizon': self.horizon,
            },
            'engine': {
                'name': self.engine,
            },
            'simulation': {
                'n_paths': self.n_paths,
                'n_steps': self.n_steps,
                'seed': self.seed,
                'block_size': self.block_size,
            },
            'solver': {
                'constraints': list(self.constraints),
                'tol': self.tol,
                'max_iter': self.max_iter,
                'max_outer': self.max_outer,
            },
            'grid': {
                'n_x': self.grid_n_x,
                'n_t': self.grid_n_t,
                'stds': self.grid_stds,
                'theta': self.theta,
                'smoothing': self.smoothing,
            },
            'report': {
                'out_dir': self.out_dir,
                'histogram_bins': self.histogram_bins,
            },
        }

    @classmethod
    def from_dict(cls, config_dict):
        """
        Create a RunConfig instance from a nested dictionary.

        Args:
            config_dict (dict): Dictionary representation of configuration

        Returns:
            RunConfig: New instance with the specified configuration
        """
        if not isinstance(config_dict, dict):
            raise ConfigError("A run configuration must be a JSON object")
        unknown = set(config_dict) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"Unknown configuration sections {sorted(unknown)}")
        model = config_dict.get('model', {})
        engine = config_dict.get('engine', {})
        simulation = config_dict.get('simulation', {})
        solver = config_dict.get('solver', {})
        grid = config_dict.get('grid', {})
        report = config_dict.get('report', {})

        # Create instance with values from dict, using default values for missing keys
        return cls(
            model=model.get('name', 'ou'),
            model_params=model.get('params', None),
            model_file=model.get('file', None),
            series_file=model.get('series', None),
            n_bins=model.get('n_bins', 40),
            x0=model.get('x0', 0.0),
            horizon=model.get('horizon', 1.0),
            engine=engine.get('name', 'mc'),
            constraints=solver.get('constraints', None),
            n_paths=simulation.get('n_paths', 100000),
            n_steps=simulation.get('n_steps', 200),
            seed=simulation.get('seed', 12345),
            block_size=simulation.get('block_size', 1024),
            tol=solver.get('tol', None),
            max_iter=solver.get('max_iter', 100),
            max_outer=solver.get('max_outer', 50),
            grid_n_x=grid.get('n_x', 401),
            grid_n_t=grid.get('n_t', 400),
            grid_stds=grid.get('stds', 8.0),
            theta=grid.get('theta', 0.5),
            smoothing=grid.get('smoothing', True),
            histogram_bins=report.get('histogram_bins', 50),
            out_dir=report.get('out_dir', 'results'),
        )

    @classmethod
    def from_file(cls, filepath):
        """Load a configuration from a JSON file."""
        try:
            with open(filepath) as f:
                data = json.load(f)
        except OSError as exc:
            raise ConfigError(f"Could not read {filepath}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{filepath} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def save(self, filepath):
        with open(filepath, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        return filepath
