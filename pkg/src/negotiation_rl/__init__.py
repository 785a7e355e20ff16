"""Bilateral multi-issue negotiation with from-scratch actor-critic agents.

Submodules: ``protocol`` (the alternating-offers engine), ``agents`` (scripted
opponents), ``analysis`` (closed-form oracles), ``neural`` (numpy networks and
policy heads), ``training`` (update rules and loops) and ``cli``.
"""

__version__ = "0.1.0"
