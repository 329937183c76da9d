import streamlit as st
import pandas as pd
import numpy as np

from models.assimilation import check_mu_condition, minimal_mu
from models.exceptions import DarcyDAError
from models.interpolants import InterpolantKind, estimate_c0, estimate_c1_c2
from models.property_checks import verify
from models.spectral_grid import first_eigenvalue
from models.twin_experiment import ExperimentConfig, run_twin_experiment, spin_up, sweep
from utils.config_parser import ConfigParser
from utils.visualization import VisualizationHelper, display_condition_status
import config

# Page configuration
st.set_page_config(
    page_title=config.APP_TITLE,
    page_icon="🌡️",
    layout="wide",
    initial_sidebar_state="expanded"
)

st.markdown("""
<style>
    .main-header {
        font-size: 2.6rem;
        font-weight: bold;
        text-align: center;
        color: #1f77b4;
        margin-bottom: 1.5rem;
    }
    .sub-header {
        font-size: 1.3rem;
        color: #666;
        text-align: center;
        margin-bottom: 2rem;
    }
</style>
""", unsafe_allow_html=True)


def main():
    """Main application function"""
    viz_helper = VisualizationHelper()

    st.markdown(f'<h1 class="main-header">{config.APP_TITLE}</h1>', unsafe_allow_html=True)
    st.markdown(f'<p class="sub-header">{config.APP_DESCRIPTION}</p>', unsafe_allow_html=True)

    with st.sidebar:
        st.title("Navigation")
        app_mode = st.selectbox(
            "Choose Mode",
            ["Twin Experiment", "Parameter Sweep", "Interpolant Constants", "Property Checks", "About"]
        )
        st.markdown("---")
        cfg = experiment_form()

    if cfg is None:
        st.info("Fill in or upload an experiment configuration to begin.")
        return

    if app_mode == "Twin Experiment":
        twin_experiment_page(cfg, viz_helper)
    elif app_mode == "Parameter Sweep":
        sweep_page(cfg, viz_helper)
    elif app_mode == "Interpolant Constants":
        interpolant_page(cfg)
    elif app_mode == "Property Checks":
        property_checks_page(cfg)
    elif app_mode == "About":
        show_about_page()


def experiment_form():
    """Sidebar inputs, or an uploaded key = value file"""
    st.markdown("### Experiment")
    uploaded = st.file_uploader("Config file", type=["cfg", "conf", "txt"])
    if uploaded is not None:
        try:
            return ConfigParser().parse_text(uploaded.getvalue().decode("utf-8"))
        except DarcyDAError as e:
            st.error(f"Config error: {e}")
            return None

    Ra = st.number_input("Ra", value=config.DEFAULT_RA, min_value=0.1)
    gamma = st.number_input("γ", value=config.DEFAULT_GAMMA, min_value=0.0)
    Nx = st.number_input("Nx", value=48, min_value=config.MIN_MODES, step=1)
    Nz = st.number_input("Nz", value=25, min_value=config.MIN_MODES, step=1)
    dt = st.number_input("dt", value=1e-3, format="%.1e", min_value=1e-6)
    T_final = st.number_input("T_final", value=2.0, min_value=0.01)
    mu = st.number_input("μ", value=250.0, min_value=0.0)
    h = st.number_input("h", value=0.06, min_value=1e-3, format="%.3f")
    interpolant = st.selectbox("Interpolant", config.INTERPOLANT_KINDS)
    noise_level = st.number_input("Noise level", value=0.0, min_value=0.0, format="%.1e")
    c_universal = st.number_input("Universal constant c", value=0.01, min_value=1e-6, format="%.3g")
    try:
        return ExperimentConfig(Ra=Ra, Nx=int(Nx), Nz=int(Nz), dt=dt, T_final=T_final, mu=mu, h=h, gamma=gamma,
                                interpolant=interpolant, noise_level=noise_level, c_universal=c_universal)
    except DarcyDAError as e:
        st.error(f"Invalid parameters: {e}")
        return None


def show_conditions(cfg):
    grid = cfg.grid()
    setup = cfg.make_setup(grid)
    lambda1 = first_eigenvalue(grid)
    ok, margin = check_mu_condition(setup, lambda1)
    display_condition_status("Nudging strength", ok, f"margin {margin:.4g}, μ* = {minimal_mu(setup, lambda1):.4g}")
    return setup


def twin_experiment_page(cfg, viz_helper):
    st.header("Twin Experiment")
    try:
        show_conditions(cfg)
    except DarcyDAError as e:
        st.error(f"Configuration error: {e}")
        return

    if st.button("Run", type="primary"):
        with st.spinner("Spinning up the reference and running the nudged system..."):
            try:
                series = run_twin_experiment(cfg, write_output=False)
            except DarcyDAError as e:
                st.error(f"Run failed: {e}")
                return

        meta = series.metadata
        display_condition_status("μ c₀² h² ≤ 1", meta["h_condition"], f"c₀ = {meta['c0']:.4g}")
        if series.failed:
            st.error("The run blew up or a step was rejected; showing the rows recorded before that.")

        col1, col2, col3 = st.columns(3)
        col1.metric("Final ||θ−η||", f"{series.final_error:.3e}")
        col2.metric("Fitted rate", f"{series.fitted_rate:.4g}")
        col3.metric("α lower bound", f"{series.diagnostics.alpha_lower:.4g}")
        if not series.diagnostics.monotone:
            st.warning("The error never decays monotonically; the rate is indicative only.")

        st.plotly_chart(viz_helper.create_error_series_chart(series), use_container_width=True)
        st.plotly_chart(viz_helper.create_sup_norm_chart(series), use_container_width=True)
        st.dataframe(series.rows, use_container_width=True)
        st.download_button("Download CSV", series.rows.to_csv(index=False, float_format=config.CSV_FLOAT_FORMAT),
                           file_name="error_series.csv", mime="text/csv")

    if st.checkbox("Show spun-up reference temperature"):
        with st.spinner("Spinning up..."):
            reference, t0 = spin_up(cfg)
        st.caption(f"absorbing bound reached at t = {t0}")
        st.plotly_chart(viz_helper.create_field_heatmap(reference.theta), use_container_width=True)


def sweep_page(cfg, viz_helper):
    st.header("Parameter Sweep")
    axis = st.selectbox("Parameter", config.SWEEP_AXES)
    default = {"mu": "0, 60, 250, 1000", "h": "0.04, 0.05, 0.06", "noise_level": "0.0001, 0.001, 0.01",
               "Ra": "30, 40, 50"}[axis]
    text = st.text_input("Values (comma separated, sorted)", default)
    if st.button("Run sweep", type="primary"):
        try:
            values = [float(v) for v in text.split(",") if v.strip()]
            with st.spinner(f"Running {len(values)} twin experiments..."):
                table = sweep(cfg, axis, values)
        except (ValueError, DarcyDAError) as e:
            st.error(f"Sweep failed: {e}")
            return
        if table["failed"].any():
            st.warning("Some rows failed; they are marked in the table.")
        st.plotly_chart(viz_helper.create_sweep_chart(table), use_container_width=True)
        st.dataframe(table, use_container_width=True)


def interpolant_page(cfg):
    st.header("Interpolant Constants")
    trials = st.slider("Random trials", 100, 1000, cfg.c0_trials, step=100)
    if st.button("Estimate"):
        rows = []
        grid = cfg.grid()
        for kind in InterpolantKind:
            try:
                interpolant = cfg.replace(interpolant=kind.value).make_interpolant(grid)
            except DarcyDAError as e:
                st.warning(f"{kind.value}: {e}")
                continue
            if kind is InterpolantKind.NODAL:
                c1, _ = estimate_c1_c2(interpolant, trials, cfg.field_seed)
                rows.append({"kind": kind.value, "constant": "c1 = c2", "value": c1, "mu c^2 h^2": np.nan})
            else:
                c0 = estimate_c0(interpolant, trials, cfg.field_seed)
                rows.append({"kind": kind.value, "constant": "c0", "value": c0,
                             "mu c^2 h^2": cfg.mu * c0 ** 2 * cfg.h ** 2})
        st.dataframe(pd.DataFrame(rows), use_container_width=True)


def property_checks_page(cfg):
    st.header("Property Checks")
    if st.button("Run checks"):
        with st.spinner("Checking..."):
            table = verify(cfg)
        if table["passed"].all():
            st.success("All checks passed")
        else:
            st.error("Some checks failed")
        st.dataframe(table, use_container_width=True)


def show_about_page():
    st.header("About")
    st.markdown("""
    Convection in a porous box heated from below, with velocity from Darcy's law.
    A reference run produces coarse temperature observations I_h(θ); a second run
    started from zero is nudged toward them with strength μ and must synchronize with
    the reference, velocity included, although it never observes the velocity.

    - **Interpolants**: spectral low-pass, volume averages, nodal values
    - **Conditions**: nudging strength against Ra and λ₁, resolution μ c₀² h² ≤ 1
    - **Outputs**: error series, fitted exponential rate, parameter sweeps
    """)
    st.caption(f"Version {config.VERSION}")


if __name__ == "__main__":
    main()
