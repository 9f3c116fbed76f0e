"""Minimum-cost rate and flow allocation for distributed source coding.

Subpackages follow the problem structure: network models and feasibility
(`netmodel`), rate regions and their oracles (`regions`), the LP engine and
dual subproblems (`lpcore`), decomposition drivers (`solvers`), brute-force
references (`oracle`), instance generation (`scenario`) and the CLI (`cli`).
"""

__version__ = "0.1.0"
