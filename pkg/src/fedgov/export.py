"""Serialization at the output boundary: rationals become {num, den, decimal}."""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction

DECIMALS = 6
CSV_HEADER = ("t", "community", "entity", "kind", "avg_seats", "avg_share", "ratio")


def decimal_str(x: Fraction, places: int = DECIMALS) -> str:
    """Fixed-point text of ``x`` rounded half-to-even at ``places`` digits."""
    scaled = Fraction(x) * 10**places
    whole, rem = divmod(scaled.numerator, scaled.denominator)
    twice = 2 * rem
    if twice > scaled.denominator or (twice == scaled.denominator and whole % 2):
        whole += 1
    sign = "-" if whole < 0 else ""
    digits = str(abs(whole)).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def rational(x: Fraction) -> dict:
    x = Fraction(x)
    return {"num": x.numerator, "den": x.denominator, "decimal": decimal_str(x)}


def report_dict(report, **extra) -> dict:
    return {
        **extra,
        "fst": report.fst,
        "horizon": report.horizon,
        "epsilon": rational(report.epsilon),
        "pfr_violations": [
            {"t": v.t, "community": v.community, "child": v.child, "seats": v.seats, "floor": v.floor}
            for v in report.pfr_violations
        ],
        "eep_gaps": [
            {"community": f, "person": p, "gap": rational(gap)} for (f, p), gap in sorted(report.eep_gaps.items())
        ],
        "efr_deficits": [
            {"community": f, "child": v, "deficit": rational(d)} for (f, v), d in sorted(report.efr_deficits.items())
        ],
        "tail_averages": [
            {"community": f, "child": v, "avg_seats": rational(seats), "avg_share": rational(share)}
            for (f, v), (seats, share) in sorted(report.child_averages.items())
        ],
    }


def report_json(report, **extra) -> str:
    return json.dumps(report_dict(report, **extra), indent=2, sort_keys=True) + "\n"


def metrics_csv(samples) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(CSV_HEADER)
    for t, f, entity, kind, seats, share, ratio in samples:
        out.writerow([t, f, entity, kind, decimal_str(seats), decimal_str(share), decimal_str(ratio)])
    return buf.getvalue()


def state_json(state) -> str:
    return json.dumps(state.to_dict(), indent=2, sort_keys=True) + "\n"
