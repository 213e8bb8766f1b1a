"""
Data analysis and visualization module.
Shapes the built tables and run reports into plot data frames and plotly charts.
"""

from typing import Any, Dict, Optional

import pandas as pd
import plotly.express as px

from .config import CHART_HEIGHT, SHOW_LEGEND
from .evaluation import SweepReport
from .passenger import PickupAggregate
from .probability import StopProbabilityTable


def lateness_plot_frame(lateness: pd.DataFrame) -> pd.DataFrame:
    """Lateness against scheduled time of day, in hours."""
    frame = lateness[['stop_id', 'scheduled_departure', 'lateness_minutes']].copy()
    frame['scheduled_hour'] = frame['scheduled_departure'].astype(float) / 60.0
    return frame[['stop_id', 'scheduled_hour', 'lateness_minutes']].reset_index(drop=True)


def probability_plot_frame(table: StopProbabilityTable, hour: Optional[int] = None) -> pd.DataFrame:
    """Stopping probability per station and hour; cells without passes are dropped."""
    frame = table.to_frame().dropna(subset=['probability'])
    if hour is not None:
        frame = frame[frame['hour'] == hour]
    frame = frame.copy()
    frame['route_position'] = frame['stop_id'].map({s: i for i, s in enumerate(table.stop_ids)})
    return frame.sort_values(['hour', 'route_position']).reset_index(drop=True)


def sweep_plot_frame(report: SweepReport) -> pd.DataFrame:
    return report.to_frame().sort_values(['pa_min', 't_p']).reset_index(drop=True)


def _layout(fig):
    fig.update_layout(height=CHART_HEIGHT, showlegend=SHOW_LEGEND)
    return fig


def summaries_and_figs(lateness: pd.DataFrame, probabilities: StopProbabilityTable,
                       pickup: PickupAggregate, sweep: SweepReport, hour: int) -> Dict[str, Any]:
    """Plot data frames and the matching figures for the report."""
    frames = {
        'lateness': lateness_plot_frame(lateness),
        'stop_probabilities': probability_plot_frame(probabilities),
        'pickup_fractions': pickup.to_frame(),
        'sweep': sweep_plot_frame(sweep),
        'sweep_num_stops': sweep.matrix('num_stops').reset_index(),
        'sweep_total_minutes': sweep.matrix('total_minutes').reset_index(),
    }
    figs = {}

    if not frames['lateness'].empty:
        fig = px.scatter(frames['lateness'], x='scheduled_hour', y='lateness_minutes', color='stop_id',
                         title="Departure lateness by scheduled time of day",
                         labels={'scheduled_hour': 'Scheduled departure (hour)',
                                 'lateness_minutes': 'Lateness (min)'})
        figs['lateness'] = _layout(fig)

    at_hour = frames['stop_probabilities'][frames['stop_probabilities']['hour'] == hour]
    if not at_hour.empty:
        fig = px.bar(at_hour, x='stop_id', y='probability',
                     title=f"Stopping probability per station at {hour:02d}:00")
        fig.update_yaxes(range=[0, 1])
        figs['stop_probabilities'] = _layout(fig)

    fig = px.bar(frames['pickup_fractions'], x='stop_id', y='pickup_fraction',
                 title=f"Average share of passengers per station ({pickup.n_simulations} simulations)")
    figs['pickup_fractions'] = _layout(fig)

    sweep_frame = frames['sweep'].assign(pa_min=frames['sweep']['pa_min'].astype(str))
    for metric, label in (('num_stops', 'Intermediate stops'), ('total_minutes', 'Trip time (min)')):
        fig = px.line(sweep_frame, x='t_p', y=metric, color='pa_min', markers=True,
                      title=f"{label} against t_p per PA_min",
                      labels={'t_p': 't_p (percentile)', metric: label, 'pa_min': 'PA_min'})
        figs[f"sweep_{metric}"] = _layout(fig)

    return {'frames': frames, 'figs': figs}
