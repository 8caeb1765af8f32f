"""Multi-robot motion planning with a learning-tuned potential field.

A 2D kinematic simulator plus library: attractive/repulsive/inter-robot
force laws, hard and soft wall-following, a permutation-invariant neighbor
embedding, a small dense-network substrate, and shared-policy PPO that
tunes the field's scale parameters online. Includes the fixed-parameter
field and plain steering-policy baselines, scenario generators, and
trajectory metrics.
"""

__version__ = "0.1.0"
