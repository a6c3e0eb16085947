"""
Services package for the small-cancellation forge.

This package contains the domain modules:
- words: Free-group words, cyclic words and word text I/O
- small_cancellation: Presentations, pieces and small-cancellation reports
- dehn: Dehn's algorithm, injectivity certificates and the normal-closure oracle
- relator_forge: Absorption and norm-stabilization relators with tuning
- tower: Towers of quotients with goals and a witness ledger
- witness: Sentences, existential-universal witnesses and finite model checking
- finite_groups: Verified multiplication tables of small groups
- norms: Conjugation-invariant norm bounds with certificates
- reproduction: The one-relator epimorphism example
- config_service: Forge configuration from App Configuration or a local file
"""

from .config_service import ConfigService
from .small_cancellation import Presentation, sc_report
from .dehn import QuotientHandle
from .tower import Tower, new_tower, push_stage

__all__ = ['ConfigService', 'Presentation', 'sc_report', 'QuotientHandle', 'Tower', 'new_tower', 'push_stage']
