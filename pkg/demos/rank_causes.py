"""Rank wait events against a detected anomaly period.

After detection flags a period on some metric, the companion wait-event
counters are sliced to that period (plus margin) and ranked two ways:
warping distance on z-normalized shapes, which tolerates lag, and plain
correlation, which rewards pointwise alignment. Events the generator
actually linked to the injection should surface at the top.

Run from the repository root:

    python3 demos/rank_causes.py
"""

from dbdiag import TrainConfig, default_scenario, detect, generate, group_periods, match_events, train
from dbdiag.data import minute_to_iso


def main():
    scenario = generate(default_scenario())
    result = train(scenario.stats, TrainConfig(seed=0, max_epochs=100, patience=15))
    scores = result.detector.score_frame(scenario.stats)
    top = group_periods(detect(scores, k=3.0))[0]
    print(f"top anomaly: {minute_to_iso(top.start)} .. {minute_to_iso(top.end)} "
          f"on {top.primary_feature}")

    linked = {ev for inj in scenario.spec.injections
              if inj.feature == top.primary_feature
              for ev in inj.linked_events}
    print(f"events the generator tied to this injection: {', '.join(sorted(linked))}\n")

    matches = match_events(scenario.stats, top.primary_feature, scenario.events,
                           top.start, top.end, margin=5)
    print(f"{'event':<30} {'dtw':>8} {'corr':>7} {'rank_dtw':>9} {'rank_corr':>10}")
    for m in matches:
        corr = "n/a" if m.correlation is None else f"{m.correlation:.3f}"
        mark = " <- linked" if m.event in linked else ""
        print(f"{m.event:<30} {m.dtw:>8.2f} {corr:>7} "
              f"{m.rank_dtw:>9} {m.rank_correlation:>10}{mark}")


if __name__ == "__main__":
    main()
