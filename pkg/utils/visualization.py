import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import plotly.graph_objects as go
import seaborn as sns
import streamlit as st
from plotly.subplots import make_subplots

import config
from models.spectral_grid import inverse_transform


class VisualizationHelper:
    """Figures for twin experiments, sweeps and temperature fields"""

    def __init__(self):
        self.colors = config.CHART_COLORS
        self.height = config.CHART_HEIGHT
        self.width = config.CHART_WIDTH

    def create_error_series_chart(self, series, title="Synchronization error"):
        """Semilog plot of ||xi||, ||xi||_H1 and ||w|| against t"""
        rows = series.rows
        fig = go.Figure()
        for column, label, color in (("xi_l2", "||θ−η||", self.colors[0]),
                                     ("xi_h1", "||θ−η||_H¹", self.colors[1]),
                                     ("w_l2", "||u−v||", self.colors[2])):
            fig.add_trace(go.Scatter(x=rows["t"], y=rows[column], mode="lines", name=label,
                                     line=dict(color=color)))
        fig.update_layout(
            title=title,
            xaxis_title="t",
            yaxis_title="error norm",
            yaxis_type="log",
            height=self.height,
        )
        return fig

    def create_sup_norm_chart(self, series):
        """max|θ| and max|η| with the absorbing bound"""
        rows = series.rows
        fig = go.Figure()
        fig.add_trace(go.Scatter(x=rows["t"], y=rows["theta_max"], mode="lines", name="max|θ|",
                                 line=dict(color=self.colors[0])))
        fig.add_trace(go.Scatter(x=rows["t"], y=rows["eta_max"], mode="lines", name="max|η|",
                                 line=dict(color=self.colors[3], dash="dash")))
        fig.add_hline(y=1.0, line_dash="dot", line_color="gray", annotation_text="limsup bound")
        fig.update_layout(title="Sup norms", xaxis_title="t", height=self.height)
        return fig

    def create_sweep_chart(self, table):
        """Fitted rate and final error against the swept parameter"""
        axis = table.attrs.get("axis", "value")
        fig = make_subplots(rows=1, cols=2, subplot_titles=("Fitted decay rate", "Final error"))
        colors = [self.colors[2] if met else self.colors[3] for met in table["conditions_met"]]
        fig.add_trace(go.Scatter(x=table["value"], y=table["fitted_rate"], mode="lines+markers",
                                 marker=dict(color=colors, size=10), name="rate"), row=1, col=1)
        fig.add_trace(go.Scatter(x=table["value"], y=table["final_error"], mode="lines+markers",
                                 marker=dict(color=self.colors[0]), name="final ||ξ||"), row=1, col=2)
        fig.update_yaxes(type="log", row=1, col=2)
        fig.update_xaxes(title_text=axis)
        fig.update_layout(height=self.height, showlegend=False)
        return fig

    def create_field_heatmap(self, theta, title="Temperature fluctuation"):
        """x-z section of a temperature field at the first y node"""
        values = inverse_transform(theta).values[:, 0, :]
        x, _, z = theta.grid.nodes()
        fig = go.Figure(data=go.Heatmap(x=x, y=z, z=values.T, colorscale="RdBu_r", zmid=0.0))
        fig.update_layout(title=title, xaxis_title="x", yaxis_title="z", height=self.height,
                          yaxis=dict(scaleanchor="x"))
        return fig

    def save_error_plot(self, series, path, title="Synchronization error"):
        """Static semilog PNG for the command line"""
        sns.set_theme(style="whitegrid")
        fig, ax = plt.subplots(figsize=(8, 5))
        rows = series.rows
        ax.semilogy(rows["t"], rows["xi_l2"], label="||θ−η||", color=self.colors[0])
        ax.semilogy(rows["t"], rows["xi_h1"], label="||θ−η||_H1", color=self.colors[1])
        ax.semilogy(rows["t"], np.maximum(rows["w_l2"], np.finfo(float).tiny), label="||u−v||",
                    color=self.colors[2])
        rate = series.fitted_rate
        if np.isfinite(rate):
            title = f"{title} (fitted rate {rate:.3g})"
        ax.set_title(title, fontsize=14, fontweight="bold")
        ax.set_xlabel("t")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        return path

    def save_sweep_plot(self, table, path):
        sns.set_theme(style="whitegrid")
        axis = table.attrs.get("axis", "value")
        fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4))
        sns.lineplot(data=table, x="value", y="fitted_rate", marker="o", ax=left)
        sns.lineplot(data=table, x="value", y="final_error", marker="o", ax=right)
        right.set_yscale("log")
        left.set_xlabel(axis)
        right.set_xlabel(axis)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        return path


def display_condition_status(label, satisfied, detail=""):
    """Coloured pass/fail line for a synchronization condition"""
    if satisfied:
        st.markdown(f"✅ **{label}** {detail}")
    else:
        st.markdown(f"⚠️ **{label}** <span style='color: #d62728'>{detail}</span>", unsafe_allow_html=True)
