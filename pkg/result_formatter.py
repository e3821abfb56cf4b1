"""
Result formatting module.
Turns solutions, traces, fields and inversion results into CSV rows and JSON
records, and parses trace files back.
"""

import csv
import json
import logging
import os

import numpy as np

from errors import TraceError
from param_space import unit_grid
from pde_core import PointTrace
from utils import format_float

logger = logging.getLogger(__name__)

TRACE_HEADER = ['t', 'u', 'ux', 'uxx']
BATCH_HEADER = ['k', 'seed', 'criterion', 'final_cost', 'evaluations', 'rel_error',
                'baseline_rel_error', 'status']


def _writer(handle):
    return csv.writer(handle, lineterminator='\n')


def _ensure_parent(path):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_field_csv(path, field):
    """SpaceTimeField as `t,x_0,...,x_n`, one row per stored time."""
    _ensure_parent(path)
    n_nodes = field.values.shape[1]
    with open(path, 'w', newline='') as f:
        writer = _writer(f)
        writer.writerow(['t'] + [f"x_{j}" for j in range(n_nodes)])
        for t, row in zip(field.times, field.values):
            writer.writerow([format_float(t)] + [format_float(v) for v in row])
    logger.info(f"Wrote solution ({len(field.times)} rows) to {path}")


def write_trace_csv(path, trace):
    """PointTrace as `t,u,ux,uxx`; uxx is left blank when not measured."""
    _ensure_parent(path)
    has_uxx = np.asarray(trace.u_xx).size == len(trace)
    with open(path, 'w', newline='') as f:
        writer = _writer(f)
        writer.writerow(TRACE_HEADER)
        for i in range(len(trace)):
            uxx = format_float(trace.u_xx[i]) if has_uxx else ''
            writer.writerow([format_float(trace.times[i]), format_float(trace.u[i]),
                             format_float(trace.u_x[i]), uxx])
    logger.info(f"Wrote trace ({len(trace)} rows) to {path}")


def read_trace_csv(path, x0):
    """Parse a trace file written by write_trace_csv; errors name the offending row."""
    columns = {name: [] for name in TRACE_HEADER}
    try:
        with open(path, newline='') as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != TRACE_HEADER:
                raise TraceError(f"{path}: row 1: expected header {','.join(TRACE_HEADER)}, got {header}")
            for row_number, row in enumerate(reader, start=2):
                if len(row) != len(TRACE_HEADER):
                    raise TraceError(f"{path}: row {row_number}: expected {len(TRACE_HEADER)} fields, got {len(row)}")
                try:
                    columns['t'].append(float(row[0]))
                    columns['u'].append(float(row[1]))
                    columns['ux'].append(float(row[2]))
                    if row[3].strip():
                        columns['uxx'].append(float(row[3]))
                except ValueError as e:
                    raise TraceError(f"{path}: row {row_number}: {e}")
    except OSError as e:
        raise TraceError(f"cannot read trace file {path}: {e}")
    if not columns['t']:
        raise TraceError(f"{path}: empty trace")
    uxx = columns['uxx'] if len(columns['uxx']) == len(columns['t']) else []
    return PointTrace(float(x0), np.array(columns['t']), np.array(columns['u']),
                      np.array(columns['ux']), np.array(uxx))


def write_mu_csv(path, mu, n_points=2001):
    """Growth field sampled on a uniform grid of [0, 1] as `x,value`."""
    _ensure_parent(path)
    x = unit_grid(n_points)
    values = mu.evaluate(x)
    with open(path, 'w', newline='') as f:
        writer = _writer(f)
        writer.writerow(['x', 'value'])
        for xi, vi in zip(x, values):
            writer.writerow([format_float(xi), format_float(vi)])


def format_inversion_result(result, seed=None):
    """Structured record of an InversionResult."""
    return {
        'criterion': result.criterion,
        'seed': seed if seed is not None else result.seed,
        'h0': [float(v) for v in result.h0] if result.h0 is not None else None,
        'h_star': [float(v) for v in result.h_star],
        'final_cost': float(result.final_cost),
        'evaluations': int(result.evaluations),
        'rel_l2_error': None if result.rel_l2_error is None else float(result.rel_l2_error),
        'message': result.message,
        'trace_of_iterates': [[int(n), float(c)] for n, c in result.trace_of_iterates],
    }


def write_batch_csv(path, records):
    _ensure_parent(path)
    with open(path, 'w', newline='') as f:
        writer = _writer(f)
        writer.writerow(BATCH_HEADER)
        for r in records:
            writer.writerow([r.k, r.seed, r.criterion, format_float(r.final_cost), r.evaluations,
                             format_float(r.rel_error), format_float(r.baseline_rel_error), r.status])
    logger.info(f"Wrote {len(records)} batch records to {path}")


def write_json(path, record):
    _ensure_parent(path)
    with open(path, 'w') as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write('\n')
