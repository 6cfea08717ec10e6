from __future__ import annotations
from . import __version__ as version
from dataclasses import asdict
from typing import Dict, List

import numpy as np
import streamlit as st
import matplotlib.pyplot as plt

from .bench import BenchResult, SummaryRow, bench, run_trials
from .generator import generate_synthetic
from .graph_loader import graph_summary
from .models import ALGORITHMS, BipartiteGraph, RunConfig

HISTOGRAM_TRIALS = 200
DEFAULT_ALGORITHMS = ["naive", "oner", "ss", "ds"]


@st.cache_resource(show_spinner=False)
def _synthetic_graph(n1: int, n2: int, density: float, seed: int) -> BipartiteGraph:
    return generate_synthetic(n1, n2, density, seed)


def _render_header() -> None:
    st.title(f"Common neighbors under edge LDP v {version}")
    st.markdown(
        "- Estimates how many neighbors two same-layer vertices share, without any vertex revealing its edges.\n"
        "- naive / oner only see the noisy graph; ss / ds let a query vertex combine its true row with the other's noisy row.\n"
        "- central is the trusted-curator baseline and is not locally private.")


def _render_sidebar() -> Dict:
    with st.sidebar:
        st.header("Graph")
        n1 = st.number_input("upper vertices", min_value=10, max_value=20_000, value=200, step=50)
        n2 = st.number_input("lower vertices", min_value=10, max_value=20_000, value=300, step=50)
        density = st.slider("edge density", min_value=0.005, max_value=0.5, value=0.05, step=0.005)
        seed = st.number_input("seed", min_value=0, value=0, step=1)

        st.header("Run")
        algorithms = st.multiselect("algorithms", ALGORITHMS, default=DEFAULT_ALGORITHMS)
        epsilon = st.slider("epsilon", min_value=0.25, max_value=4.0, value=2.0, step=0.25)
        fraction = st.slider("eps1 fraction (ss, ds_basic)", min_value=0.1, max_value=0.9, value=0.5, step=0.05)
        pairs = st.number_input("pairs", min_value=1, max_value=1000, value=10, step=5)
        trials = st.number_input("trials per pair", min_value=1, max_value=100, value=1, step=1)
        run = st.button("Run benchmark", width="stretch", disabled=not algorithms)
    return dict(
        n1=int(n1), n2=int(n2), density=float(density), seed=int(seed),
        algorithms=tuple(algorithms), epsilon=float(epsilon), fraction=float(fraction),
        pairs=int(pairs), trials=int(trials), run=run,
    )


def _run(g: BipartiteGraph, knobs: Dict) -> None:
    config = RunConfig(
        algorithms=knobs["algorithms"],
        epsilons=(knobs["epsilon"],),
        eps1_fractions=(knobs["fraction"],),
        pairs=knobs["pairs"],
        trials_per_pair=knobs["trials"],
        seed=knobs["seed"],
    )
    result = bench(g, config)
    spread = run_trials(
        g, result.pairs[:1], config.algorithms, knobs["epsilon"], HISTOGRAM_TRIALS, knobs["seed"],
        eps1_fraction=knobs["fraction"],
    )
    estimates: Dict[str, List[float]] = {}
    for r in spread:
        estimates.setdefault(r.row.algo, []).append(r.row.estimate)
    st.session_state.result = result
    st.session_state.estimates = estimates
    st.session_state.true_c2 = spread[0].row.true_c2 if spread else 0


def _render_summary(result: BenchResult) -> None:
    st.subheader("Summary")
    st.dataframe([asdict(s) for s in result.summary], width="stretch")


def _render_mae(summary: List[SummaryRow]) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    names = [s.algo for s in summary]
    ax.bar(names, [max(s.mae, 1e-9) for s in summary], color="tab:blue")
    ax.set_yscale("log")
    ax.set_ylabel("MAE")
    ax.grid(True, axis="y", linestyle="--", alpha=0.3)
    ax.set_title("Mean absolute error")
    st.pyplot(fig, width="stretch")
    plt.close(fig)


def _render_histograms(estimates: Dict[str, List[float]], true_c2: int) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for algo, values in estimates.items():
        ax.hist(np.asarray(values), bins=30, alpha=0.45, label=algo)
    ax.axvline(true_c2, color="black", linestyle="--", label="true C2")
    ax.set_xlabel("estimate")
    ax.legend()
    ax.set_title(f"{HISTOGRAM_TRIALS} trials on one pair")
    st.pyplot(fig, width="stretch")
    plt.close(fig)


def run_app():
    _render_header()
    knobs = _render_sidebar()
    g = _synthetic_graph(knobs["n1"], knobs["n2"], knobs["density"], knobs["seed"])

    summary = graph_summary(g)
    for col, (key, value) in zip(st.columns(len(summary)), summary.items()):
        col.metric(key, value)

    if knobs["run"]:
        with st.spinner("running trials"):
            _run(g, knobs)

    result = st.session_state.get("result")
    if result is None:
        st.info("Pick algorithms in the sidebar and press Run benchmark.")
        return

    _render_summary(result)
    left, right = st.columns(2, gap="medium")
    with left:
        _render_mae(result.summary)
    with right:
        _render_histograms(st.session_state.estimates, st.session_state.true_c2)
