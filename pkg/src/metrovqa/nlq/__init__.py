from metrovqa.nlq.templates import (
    TEMPLATES,
    NoTemplateMatch,
    Template,
    get_template,
    instantiate_template,
    match_template,
    parse_question_regex,
    template_of_program,
)

__all__ = [
    "TEMPLATES",
    "NoTemplateMatch",
    "Template",
    "get_template",
    "instantiate_template",
    "match_template",
    "parse_question_regex",
    "template_of_program",
]
