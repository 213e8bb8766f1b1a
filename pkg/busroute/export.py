"""
HTML export module.
Writes the standalone HTML report with the tables and charts of a run.
"""

import html
from typing import Any, Dict, Mapping

import pandas as pd
import plotly.io as pio

from .utils import atomic_write_text

_SECTIONS = (
    ('lateness', "Departure lateness"),
    ('stop_probabilities', "Stopping probabilities"),
    ('pickup_fractions', "Simulated passenger pick-up"),
    ('sweep_num_stops', "Parameter sweep: intermediate stops"),
    ('sweep_total_minutes', "Parameter sweep: trip time"),
)

_STYLE = """
body { font-family: Helvetica, Arial, sans-serif; max-width: 1100px; margin: 0 auto; padding: 16px; color: #222; }
h1 { font-size: 1.6em; border-bottom: 3px solid #c8102e; padding-bottom: 6px; }
h2 { font-size: 1.2em; margin-top: 28px; }
dl.params { display: grid; grid-template-columns: max-content auto; gap: 4px 16px; background: #f4f6f8; padding: 10px 14px; }
dl.params dt { font-weight: bold; }
dl.params dd { margin: 0; font-family: monospace; }
table.grid { border-collapse: collapse; margin: 8px 0; }
table.grid th, table.grid td { border: 1px solid #ccc; padding: 4px 10px; text-align: right; }
table.grid th { background: #e9edf1; }
p.empty { color: #888; font-style: italic; }
"""


def _frame_section(heading: str, frame: pd.DataFrame, float_format: str) -> str:
    body = frame.to_html(classes='grid', index=False, border=0, float_format=float_format)
    return f'<section><h2>{heading}</h2>\n{body}\n</section>'


def export_html(out_path: str, title: str, summaries: Dict[str, Any], context: Mapping[str, Any]) -> None:
    """Export the report to a standalone HTML file."""
    escaped = html.escape(title)
    parts = [f'<!DOCTYPE html>\n<html lang="en">\n<head>\n<meta charset="utf-8">\n<title>{escaped}</title>\n'
             f'<style>{_STYLE}</style>\n</head>\n<body>\n<h1>{escaped}</h1>']

    parts.append('<dl class="params">')
    for key, value in context.items():
        parts.append(f'<dt>{html.escape(str(key))}</dt><dd>{html.escape(str(value))}</dd>')
    parts.append('</dl>')

    # plotly.js is inlined once, with the first chart
    include_js = "inline"
    figs = summaries['figs']
    for name, heading in _SECTIONS:
        if name not in figs:
            parts.append(f'<section><h2>{heading}</h2><p class="empty">No data.</p></section>')
            continue
        chart = pio.to_html(figs[name], include_plotlyjs=include_js, full_html=False, div_id=name)
        parts.append(f'<section><h2>{heading}</h2>\n{chart}\n</section>')
        include_js = False

    frames = summaries['frames']
    if not frames['sweep'].empty:
        parts.append(_frame_section("Sweep grid", frames['sweep'], '%.2f'))
    parts.append(_frame_section("Pick-up fractions", frames['pickup_fractions'], '%.3f'))

    parts.append('</body>\n</html>')
    atomic_write_text(out_path, '\n'.join(parts))
