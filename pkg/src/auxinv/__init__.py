"""Subject-auxiliary inversion laboratory.

Tools for asking whether small sequence models learn English yes/no
question formation as a structure-sensitive rule (front the auxiliary of
the main clause) or a linear one (front the first auxiliary): grammars
and samplers for controlled declarative/question corpora, a count-based
and two neural language models trained from scratch, and scoring and
evaluation protocols for comparing candidate question forms.
"""

__version__ = "0.1.0"
