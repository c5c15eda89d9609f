"""Goal-conditioned RL exploration lab.

Maze GA-MDPs, achieved-goal density models, entropy-driven sub-goal
selection, skill pre-training, skill-augmented goal exploration, and
brute-force verification oracles, behind the ``geaps-lab`` CLI.
"""

__version__ = "0.1.0"
