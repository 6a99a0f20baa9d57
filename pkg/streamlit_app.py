import streamlit as st
import pandas as pd
import matplotlib.pyplot as plt
import os
import json
import sys

sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from src.engines.pipeline import run_pipeline
from src.errors import EntropicStressError
from src.reporting.plots import plot_drift_field, plot_histograms
from src.reporting.report_generator import export_report
from src.simulation.config import RunConfig

st.set_page_config(
    page_title="Entropic Stress Testing",
    page_icon="📉",
    layout="wide",
    initial_sidebar_state="expanded"
)

st.markdown("""
<style>
    .main-header {
        font-size: 2.5rem;
        font-weight: bold;
        color: #1E3A8A;
        margin-bottom: 1rem;
    }
    .section-header {
        font-size: 1.5rem;
        font-weight: bold;
        color: #2563EB;
        margin-top: 1.5rem;
        margin-bottom: 1rem;
    }
</style>
""", unsafe_allow_html=True)

st.markdown('<div class="main-header">Entropic Stress Testing</div>', unsafe_allow_html=True)
st.markdown("""
Stress a reference model by imposing constraints on its terminal distribution or on
path functionals, and inspect the closest model in relative entropy: the new drift,
the stressed distributions and the sensitivities of derived risk measures.
""")


def load_configs():
    """Load all saved run configurations from the config directory"""
    configs = {}
    try:
        config_dir = "config"
        if os.path.exists(config_dir):
            for filename in sorted(os.listdir(config_dir)):
                if filename.endswith('.json'):
                    with open(os.path.join(config_dir, filename), 'r') as f:
                        configs[filename] = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        st.error(f"Error loading saved configurations: {e}")
    return configs


def load_manifests():
    """Load run manifests found under the results directory"""
    manifests = []
    results_dir = "results"
    if not os.path.exists(results_dir):
        return manifests
    for root, _, files in os.walk(results_dir):
        if "manifest.json" in files:
            try:
                with open(os.path.join(root, "manifest.json"), 'r') as f:
                    manifests.append((root, json.load(f)))
            except (OSError, json.JSONDecodeError) as e:
                st.error(f"Error loading {root}: {e}")
    return sorted(manifests, key=lambda item: item[0])


tab1, tab2 = st.tabs(["Run Stress Test", "Previous Results"])

with tab1:
    st.markdown('<div class="section-header">Configure and Run</div>', unsafe_allow_html=True)

    saved = load_configs()
    base_name = st.selectbox("Start from configuration", options=["(defaults)"] + list(saved))
    base = RunConfig.from_dict(saved[base_name]) if base_name in saved else RunConfig()

    with st.form("run_config"):
        col1, col2 = st.columns(2)

        with col1:
            st.markdown("### Reference Model")
            model = st.selectbox("Model", options=["ou", "brownian", "fitted"],
                                 index=["ou", "brownian", "fitted"].index(base.model))
            model_file = st.text_input("Fitted model CSV", value=base.model_file or "")
            sigma = st.number_input("Volatility", min_value=0.01, value=float(base.model_params.get("sigma", 1.0)))
            theta = st.number_input("Mean reversion (OU)", min_value=0.0,
                                    value=float(base.model_params.get("theta", 1.0)))
            x0 = st.number_input("Initial state", value=float(base.x0))
            horizon = st.number_input("Horizon", min_value=0.01, value=float(base.horizon))

        with col2:
            st.markdown("### Constraints and Engine")
            engine = st.selectbox("Engine", options=["mc", "pde"], index=["mc", "pde"].index(base.engine))
            constraints_text = st.text_area(
                "Constraints (one per line)",
                value="\n".join(base.constraints) or "var(level=0.9,shift=+10%)",
                help='e.g. "var(level=0.5,shift=-10%)" or "barrier_time(level=-0.1,scale=0.5)"')
            n_paths = st.number_input("Paths", min_value=1000, max_value=2000000, value=int(base.n_paths), step=1000)
            n_steps = st.number_input("Steps per path", min_value=10, max_value=5000, value=int(base.n_steps))
            seed = st.number_input("Seed", min_value=0, value=int(base.seed))
            save_results = st.checkbox("Save Report Artifacts", value=True)

        submit_button = st.form_submit_button("Run Stress Test")

    if submit_button:
        params = {"sigma": sigma} if model == "brownian" else {"sigma": sigma, "theta": theta}
        config = RunConfig(
            model=model,
            model_params=params if model != "fitted" else None,
            model_file=model_file or None,
            x0=x0,
            horizon=horizon,
            engine=engine,
            constraints=[line.strip() for line in constraints_text.splitlines() if line.strip()],
            n_paths=int(n_paths),
            n_steps=int(n_steps),
            seed=int(seed),
            n_bins=base.n_bins,
            series_file=base.series_file,
            grid_n_x=base.grid_n_x,
            grid_n_t=base.grid_n_t,
            out_dir=os.path.join("results", f"{engine}_{int(seed)}"),
        )
        try:
            with st.spinner("Running..."):
                report = run_pipeline(config)
        except EntropicStressError as e:
            st.error(str(e))
            st.stop()

        st.markdown('<div class="section-header">Results</div>', unsafe_allow_html=True)
        col1, col2, col3 = st.columns(3)
        with col1:
            st.metric("Status", "Converged" if report.converged else "Not converged")
        with col2:
            st.metric("KL Divergence", f"{report.kl:.5f}")
        with col3:
            if report.result is not None and report.result.ess is not None:
                st.metric("Effective Sample Size", f"{report.result.ess:,.0f}")
            elif report.result is not None:
                st.metric("Path KL Estimate", f"{report.result.diagnostics['path_kl']:.5f}")

        if report.result is not None:
            result = report.result
            st.dataframe(pd.DataFrame({
                "constraint": list(result.labels),
                "target": result.targets,
                "eta": result.eta,
                "residual": result.residual,
            }))

        for name, histogram in sorted(report.histograms.items()):
            st.write(f"##### Distribution of {name}")
            fig = plot_histograms(histogram)
            st.pyplot(fig)
            plt.close(fig)

        if report.result is not None and report.result.drift_field is not None:
            st.write("##### Drift under the stressed model")
            fig = plot_drift_field(report.result.drift_field)
            st.pyplot(fig)
            plt.close(fig)

        if report.sensitivities:
            st.write("##### Entropic sensitivities")
            st.dataframe(pd.DataFrame(report.sensitivities))

        if save_results:
            digests = export_report(report, config.out_dir)
            st.success(f"{len(digests)} artifacts saved to {config.out_dir}")

with tab2:
    st.markdown('<div class="section-header">Previous Results</div>', unsafe_allow_html=True)
    manifests = load_manifests()
    if not manifests:
        st.info("No saved reports found in the results directory.")
    else:
        selected = st.selectbox("Report", options=[root for root, _ in manifests])
        manifest = dict(manifests)[selected]
        solution = manifest["solution"]
        col1, col2 = st.columns(2)
        with col1:
            st.metric("Status", "Converged" if solution["converged"] else "Not converged")
        with col2:
            st.metric("KL Divergence", f"{solution['kl']:.5f}")
        if "constraints" in solution:
            st.dataframe(pd.DataFrame(solution["constraints"]))
        for filename in sorted(manifest["artifacts"]):
            if filename.startswith("hist_") and filename.endswith(".csv"):
                table = pd.read_csv(os.path.join(selected, filename))
                st.write(f"##### {filename}")
                st.bar_chart(table.set_index("bin_left").drop(columns=["bin_right"]))
        with st.expander("Manifest"):
            st.json(manifest)
