#!/usr/bin/env python3
"""Sweep single-control deployments over the bundled incident model: show
which controls stop the attack on their own, where the earliest block lands,
and the full family of minimal inhibiting sets."""

from iftkit.fixtures import black_basta_tree
from iftkit.model import tree_controls
from iftkit.whatif import Deployment, earliest_block, evaluate, minimal_inhibiting_sets


def main() -> None:
    tree = black_basta_tree()
    controls = sorted(tree_controls(tree), key=str)

    print(f"incident: {tree.metadata.case_id} "
          f"({tree.metadata.variant}, {tree.metadata.category.value})")
    print(f"controls on inhibit gates: {len(controls)}\n")

    print(f"{'control':<30} {'stops attack':<14} earliest block")
    for control in controls:
        deployment = Deployment.of(control)
        outcome = evaluate(tree, deployment)
        block = earliest_block(tree, deployment)
        where = f"phase {block[0]}, level {block[1]}" if block else "-"
        stops = "yes" if not outcome.top_occurs else "no"
        print(f"{str(control):<30} {stops:<14} {where}")

    sets = minimal_inhibiting_sets(tree, max_size=len(controls))
    print(f"\nminimal inhibiting sets ({len(sets)}):")
    for combo in sets:
        print("  {" + ", ".join(sorted(str(c) for c in combo)) + "}")


if __name__ == "__main__":
    main()
