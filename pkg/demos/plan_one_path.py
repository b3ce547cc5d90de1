"""One module, one target cell: how the budget shapes an informative path.

Trains a GP on 40% of a random 30x30 field, then plans the same trip with
three budgets. A loose budget lets the search wander through high-entropy
cells; a tight one forces something close to a shortest path.
"""

from infoform import Cell, eps_search, generate_field, manhattan_distance
from infoform.experiments import train_gp
from infoform.grid import to_ascii

grid = generate_field(seed=1, width=30, height=30)
gp = train_gp(grid, fraction=0.4, seed=2)
print("fitted", gp.hyperparams)

start, goal = Cell(4, 4), Cell(20, 16)
print("manhattan distance", manhattan_distance(start, goal))

for budget in (30, 40, 55):
    explored = []
    plan = eps_search(start, goal, budget, gp, grid,
                      on_expand=lambda c, g, hu: explored.append(c))
    if plan is None:
        print(f"B={budget}: no path")
        continue
    print(f"\nB={budget}: cost {plan.cost}, informativeness {plan.informativeness:.2f}, "
          f"{len(explored)} expansions")
    print(to_ascii(grid, explored=explored, path=plan.cells))
