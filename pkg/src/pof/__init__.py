"""Proof-of-following access control for vehicle platoons.

A candidate joins a platoon only if the signal strength it observed from
roadside base stations correlates with the verifier's own observations over
the same window. Subpackages:

- ``kinematics``: routes, interpolation and the ground-truth following test
- ``channel``: path loss, the correlated shadow field and RSS trace synthesis
- ``sigproc``: alignment, smoothing, Pearson correlation, approximate entropy
- ``verify``: the K-of-alpha decision rule, its passing probability and tuning
- ``protocol``: wire messages, toy crypto and the session state machines
- ``simnet``: discrete-event simulation of sessions under attack
- ``harness``: configuration, experiments and the ``pof`` command line
"""

__version__ = "0.1.0"
