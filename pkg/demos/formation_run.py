"""Ten modules build a ten-spot configuration while collecting information.

Walks through the pipeline one stage at a time instead of calling
``experiments.run``, so each intermediate object can be inspected.
"""

from infoform import acting_order, allocate_sa, check_no_hole, run_acting
from infoform.acting import SimWorld
from infoform.experiments import ExperimentConfig, prepare

cfg = ExperimentConfig(seed=4, modules=10, spots=10)
inst = prepare(cfg, rep=0)

print("target configuration (id x y heading, then edges):")
print(inst.config.dumps())

assignment = allocate_sa(inst.bids, inst.config.ids, seed=inst.alloc_seed)
print("assignment (spot -> module):", assignment.spot_to_module)
print(f"estimated information {assignment.total_informativeness():.2f}, "
      f"{assignment.message_count} messages")

order = acting_order(inst.config, inst.order_seed)
print("acting order:", order)

world = SimWorld.create(inst.grid, inst.gp, inst.config, assignment, inst.starts, order,
                        cfg.budget, cfg.replan_interval)
report = run_acting(world)
print(f"collected {report.collected:.2f} in {report.steps} steps, "
      f"{report.replans} replans ({report.replans_accepted} accepted), {report.detours} detours")
print("no hole formed:", check_no_hole(world))
for m, cells in sorted(report.paths.items()):
    print(f"  module {m}: {len(cells) - 1} moves")
