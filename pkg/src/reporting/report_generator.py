import csv
import hashlib
import json
import logging
import os

import numpy as np
import pandas as pd
import scipy

import src

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
SENSITIVITY_FILE = "sensitivities.csv"
LAMBDA_FILE = "lambda_grid.csv"
DRIFT_FILE = "drift_grid.csv"
FITTED_FILE = "fitted_model.csv"


def _number(value):
    return format(float(value), '.17g')


def file_digest(filepath):
    """SHA-256 hex digest of a file."""
    sha = hashlib.sha256()
    with open(filepath, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            sha.update(chunk)
    return sha.hexdigest()


class ReportGenerator:
    """
    Handles generation of report artifacts from a stress run.

    File names are fixed and every number is written at full precision, so
    two runs with the same configuration and seed produce identical files.
    """

    def __init__(self, report, out_dir=None):
        """
        Initialize the report generator.

        Args:
            report (RunReport): The run to report
            out_dir (str, optional): Output directory; the configured one when None
        """
        self.report = report
        self.results_dir = out_dir or report.config.out_dir
        self.artifacts = []

    def _path(self, filename):
        os.makedirs(self.results_dir, exist_ok=True)
        return os.path.join(self.results_dir, filename)

    def _register(self, filepath):
        self.artifacts.append(filepath)
        logger.info("Wrote %s", filepath)
        return filepath

    def generate_histogram_csv(self, histogram):
        """
        Write bin edges and masses of one histogram.

        Args:
            histogram (Histogram): Masses under P and, when available, under Q

        Returns:
            str: Path to the generated CSV file
        """
        filepath = self._path(f"hist_{histogram.name}.csv")
        with open(filepath, 'w', newline='') as csvfile:
            writer = csv.writer(csvfile, lineterminator="\n")
            header = ['bin_left', 'bin_right', 'mass_P']
            if histogram.mass_q is not None:
                header.append('mass_Q')
            writer.writerow(header)
            for i in range(len(histogram.mass_p)):
                row = [_number(histogram.edges[i]), _number(histogram.edges[i + 1]),
                       _number(histogram.mass_p[i])]
                if histogram.mass_q is not None:
                    row.append(_number(histogram.mass_q[i]))
                writer.writerow(row)
        return self._register(filepath)

    def generate_sensitivity_csv(self):
        filepath = self._path(SENSITIVITY_FILE)
        with open(filepath, 'w', newline='') as csvfile:
            writer = csv.writer(csvfile, lineterminator="\n")
            writer.writerow(['constraint', 'd_mean', 'd_tvar'])
            for row in self.report.sensitivities:
                writer.writerow([row['constraint'], _number(row['mean']), _number(row['tvar'])])
        return self._register(filepath)

    def generate_field_csvs(self):
        result = self.report.result
        paths = []
        if result is not None and result.lambda_field is not None:
            paths.append(self._register(result.lambda_field.to_csv(self._path(LAMBDA_FILE))))
        if result is not None and result.drift_field is not None:
            paths.append(self._register(result.drift_field.to_csv(self._path(DRIFT_FILE))))
        return paths

    def generate_fitted_model_csv(self):
        if self.report.fitted_model is None:
            return None
        return self._register(self.report.fitted_model.to_csv(self._path(FITTED_FILE)))

    def manifest(self):
        """
        The run manifest: configuration echo, solution, seeds, versions and digests.

        Returns:
            dict: JSON-serialisable manifest
        """
        report = self.report
        result = report.result
        solution = {'converged': report.converged, 'kl': report.kl}
        if result is not None:
            solution.update({
                'engine': result.engine,
                'iterations': int(result.iterations),
                'constraints': [
                    {'label': label, 'target': float(target), 'eta': float(eta), 'residual': float(residual)}
                    for label, target, eta, residual in zip(result.labels, result.targets,
                                                            result.eta, result.residual)
                ],
                'diagnostics': result.diagnostics,
            })
        return {
            'config': report.config.to_dict(),
            'solution': solution,
            'seeds': report.reference.seed_manifest.to_dict(),
            'versions': {
                'entropic_stress': src.__version__,
                'numpy': np.__version__,
                'scipy': scipy.__version__,
                'pandas': pd.__version__,
            },
            'artifacts': {os.path.basename(path): file_digest(path) for path in sorted(self.artifacts)},
        }

    def generate_all(self):
        """
        Write every artifact, then the manifest.

        Returns:
            dict: Artifact file name to SHA-256 digest, including the manifest
        """
        self.artifacts = []
        for name in sorted(self.report.histograms):
            self.generate_histogram_csv(self.report.histograms[name])
        if self.report.sensitivities:
            self.generate_sensitivity_csv()
        self.generate_field_csvs()
        self.generate_fitted_model_csv()

        manifest = self.manifest()
        filepath = self._path(MANIFEST_FILE)
        with open(filepath, 'w') as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        digests = dict(manifest['artifacts'])
        digests[MANIFEST_FILE] = file_digest(filepath)
        logger.info("Report with %d artifacts saved to %s", len(digests), self.results_dir)
        return digests


def export_report(report, out_dir=None):
    """Write all report artifacts of ``report`` to ``out_dir``; returns name -> digest."""
    return ReportGenerator(report, out_dir).generate_all()
