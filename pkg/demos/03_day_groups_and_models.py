"""Discover which weekdays share a flow regime, then fit one model per group.

The greedy merge walks Mon..Sun and keeps extending the current group while
the day main effect stays insignificant; each group then gets its own
period-offset regression whose predictions are the cell means.

    python demos/03_day_groups_and_models.py
"""

from flowcast import PeriodSchedule, discover_groups, fit_models, predict
from flowcast.synth import noisy_counts

counts = noisy_counts(weeks=4, noise_sd=10.0, seed=1)
schedule = PeriodSchedule()

grouping = discover_groups(counts, alpha=0.05)
print("merge decisions (candidate days -> p value of the day effect):")
for decision in grouping.evidence:
    outcome = "merged" if decision.merged else "split"
    print(f"  {'+'.join(decision.days):<28} p = {decision.p_value:<12.4g} {outcome}")
print("\ndiscovered groups:", " | ".join("+".join(g) for g in grouping.groups))

models = fit_models(counts, grouping, "outbound", schedule)
for model in models:
    fit = model.fit
    print(f"\ngroup {'+'.join(model.group)}  "
          f"(adjusted R2 = {fit.adj_r2 * 100:.2f}%, residual SE = {fit.residual_se:.2f})")
    print("  period:    " + "".join(f"{p:>9}" for p in range(1, model.period_count + 1)))
    print("  predicted: " + "".join(f"{predict(model, p):9.1f}" for p in range(1, model.period_count + 1)))

# The reference period is the last one: its prediction is the intercept.
first = models[0]
print(f"\nintercept of the first model: {first.fit.intercept:.2f} "
      f"= prediction for period {first.fit.reference_period}")
