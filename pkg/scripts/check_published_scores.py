#!/usr/bin/env python3
"""Recompute the published leaderboard aggregates from their printed
subscores and show the deltas.

Most rows land within the 0.0005 print-rounding radius. A handful do
not, because the source tables computed aggregates from unrounded
subscores (and one Overall cell transposes two digits); this script
makes those deltas visible instead of hiding them."""

from decimal import Decimal

from sysdiag.metrics import score_card

ROWS = [
    ("t1-workflow-3b", "0.988", "0.828", "0.735", "0.395", "0.855", "0.671"),
    ("t1-eda-elite-winner", "0.984", "0.787", "0.777", "0.370", "0.862", "0.665"),
    ("t1-qwen2.5-vl-3b-e2e", "0.111", "0.038", "0.014", "0.360", "0.058", "0.179"),
    ("t1-hint-grpo-e2e", "0.153", "0.062", "0.025", "0.355", "0.083", "0.192"),
    ("t1-gemini-2.5-pro-e2e", "0.008", "0.005", "0.008", "0.685", "0.007", "0.278"),
    ("t1-gpt-5-e2e", "0.085", "0.068", "0.029", "0.730", "0.059", "0.327"),
    ("t1-claude-sonnet-4-e2e", "0.477", "0.337", "0.265", "0.445", "0.364", "0.397"),
    ("t2-workflow-3b", "0.988", "0.828", "0.735", "0.395", "0.855", "0.671"),
    ("t2-qwen2.5-vl-3b", "0.988", "0.375", "0.203", "0.365", "0.552", "0.447"),
    ("t2-hint-grpo", "0.988", "0.454", "0.258", "0.355", "0.589", "0.496"),
    ("t2-gemini-2.5-pro", "0.986", "0.870", "0.832", "0.685", "0.901", "0.815"),
    ("t2-gpt-5", "0.986", "0.582", "0.555", "0.705", "0.733", "0.722"),
    ("t2-claude-sonnet-4", "0.986", "0.486", "0.314", "0.450", "0.618", "0.551"),
    ("t3-base", "0.988", "0.375", "0.203", "0.365", "0.552", "0.447"),
    ("t3-plus-pretrain", "0.988", "0.454", "0.258", "0.355", "0.589", "0.496"),
    ("t3-plus-sft", "0.988", "0.736", "0.594", "0.355", "0.780", "0.610"),
    ("t3-plus-rl", "0.988", "0.807", "0.725", "0.355", "0.847", "0.650"),
    ("t3-plus-lora", "0.988", "0.828", "0.735", "0.395", "0.855", "0.671"),
]

TOL = Decimal("0.0005")


def main() -> None:
    print(f"{'row':26} {'task1':>8} {'printed':>8} {'delta':>8}   "
          f"{'overall':>8} {'printed':>8} {'delta':>8}")
    bad = 0
    for name, s1, s2, s3, t2, pt1, pov in ROWS:
        card = score_card(float(s1), float(s2), float(s3), float(t2))
        t1 = Decimal("0.4") * Decimal(s1) + Decimal("0.2") * Decimal(s2) \
            + Decimal("0.4") * Decimal(s3)
        ov = Decimal("0.6") * t1 + Decimal("0.4") * Decimal(t2)
        d1 = abs(t1 - Decimal(pt1))
        d2 = abs(ov - Decimal(pov))
        flag = ""
        if d1 > TOL or d2 > TOL:
            bad += 1
            flag = "  <-- inconsistent with printed subscores"
        print(f"{name:26} {card.task1:8.4f} {pt1:>8} {d1!s:>8}   "
              f"{card.overall:8.4f} {pov:>8} {d2!s:>8}{flag}")
    print(f"\n{len(ROWS) - bad}/{len(ROWS)} rows reproduce within +/-0.0005")


if __name__ == "__main__":
    main()
