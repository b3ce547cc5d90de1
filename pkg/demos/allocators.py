"""Sequential allocation vs. the epsilon-auction on the same bids.

Both allocators see identical bid tables, so differences in estimated
information and message counts come from the allocation rule alone.
"""

from infoform.experiments import ExperimentConfig, compare_allocators

rows = compare_allocators(ExperimentConfig(seed=0, reps=3), sizes=[5, 10])
print(f"{'n':>3} {'info sa':>9} {'info auc':>9} {'gap':>6}  messages sa / auction per rep")
for r in rows:
    print(f"{r['n']:>3} {r['info_sa']:>9.1f} {r['info_auction']:>9.1f} {r['info_rel_gap']:>6.3f}  "
          f"{r['messages_sa']} / {r['messages_auction']}")
# The auction usually finds a bit more information; the price is messages
# that grow much faster than the 2n of the sequential scheme.
