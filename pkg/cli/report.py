"""
Report Rendering
JSON and text renderings of estimate and bridge reports

Floats are written with 17 significant digits in text and with Python's
shortest round-trip repr in JSON; both parse back to the same float64.
"""

import json


def format_number(value):
    """
    Render a report value for the text table

    Args:
        value: float, int, bool or None

    Returns:
        String; floats use 17 significant digits
    """
    if value is None:
        return '-'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    return format(float(value), '.17g')


def render_json(report):
    """
    Machine-readable rendering

    Args:
        report: Report dictionary

    Returns:
        JSON text terminated by a newline
    """
    return json.dumps(report, indent=2) + '\n'


def _matrix_text(matrix):
    return '[' + ', '.join('[' + ', '.join(format_number(v) for v in row) + ']' for row in matrix) + ']'


def _field_lines(fields, indent='  '):
    width = max(len(name) for name, _ in fields)
    return [f"{indent}{name.ljust(width)} = {format_number(value)}" for name, value in fields]


def render_estimate_text(report):
    lines = [
        f"estimate: {report['expression']}",
        f"  family     : {report['family']}",
        f"  mean       : [{', '.join(format_number(v) for v in report['mean'])}]",
        f"  covariance : {_matrix_text(report['covariance'])}",
        f"  seed       : {report['seed']}",
        f"  mc_count   : {report['mc_count']}",
    ]
    if report.get('symmetrized'):
        lines.append('  note       : covariance was symmetrized')

    for method, result in report['methods'].items():
        lines.append(f"[{method}]")
        lines.extend(_field_lines(list(result.items())))

    linearization = report.get('linearization')
    if linearization:
        lines.append('[linearization]')
        lines.extend(_field_lines(list(linearization.items())))

    comparison = report['comparison']
    if comparison['deltas']:
        lines.append('[deltas]')
        lines.extend(_field_lines(
            [(f"{d['from']} -> {d['to']}", d['delta']) for d in comparison['deltas']]
        ))
    if comparison.get('closest_to_reference'):
        lines.append(f"closest to {comparison['reference']}: {comparison['closest_to_reference']}")
    return '\n'.join(lines) + '\n'


def render_bridge_text(report):
    columns = ('alpha', 'classical_mean', 'rescaled', 'quantum_value', 'gap', 'mc_std_error', 'count')
    lines = [
        f"bridge: {report['expression']}",
        f"  family        : {report['family']}",
        f"  rho           : {_matrix_text(report['rho'])}",
        f"  seed          : {report['seed']}",
        f"  quantum_value : {format_number(report['quantum_value'])}",
        '[rows]',
        '  ' + '  '.join(name.ljust(24) for name in columns).rstrip(),
    ]
    for row in report['rows']:
        lines.append('  ' + '  '.join(format_number(row[name]).ljust(24) for name in columns).rstrip())

    for name in ('gap_fit', 'rescaled_fit'):
        lines.append(f"[{name}]")
        lines.extend(_field_lines(list(report[name].items())))
    if not report['gap_fit']['significant']:
        lines.append('gap slope: not significant (gaps within Monte Carlo noise)')
    return '\n'.join(lines) + '\n'


def render_text(report):
    """
    Human-readable rendering

    Args:
        report: Estimate or bridge report

    Returns:
        Text terminated by a newline
    """
    if report['command'] == 'bridge':
        return render_bridge_text(report)
    return render_estimate_text(report)


def render(report, output_format='text'):
    """
    Render in the requested format

    Args:
        report: Report dictionary
        output_format: 'json' or 'text'

    Returns:
        Rendered text
    """
    if output_format == 'json':
        return render_json(report)
    return render_text(report)
