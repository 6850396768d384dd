"""sprkit: scene-agnostic pose regression at desk scale.

Subpackages: ``autodiff`` (reverse-mode engine, optimizer, checkpoints),
``pose`` (SE(3)/quaternion algebra), ``ssm`` (selective state-space
blocks), ``worldsim`` (synthetic panoramic scenes and datasets), ``model``
(the dual-branch sequence model), ``bench`` (paradigm benchmark and
studies), ``cli`` (command-line entry point).
"""

__version__ = "0.1.0"
