#pragma once

// Prompt templates used by the pipelines, shipped with the library so runs
// are reproducible. Placeholders ({task_prompt}, {article}, {article_1},
// {article_2}, {criteria_list}, {dimension}, ...) are substituted by
// render(); all other braces are left untouched.

#include <map>
#include <string>

#include "reval/core.hpp"

namespace reval {

struct PromptTemplate {
    std::string system_role;
    std::string user_template;
};

inline std::string render_prompt(const std::string& tpl,
                                 const std::map<std::string, std::string>& values) {
    std::string out = tpl;
    for (const auto& [key, value] : values) {
        const std::string token = "{" + key + "}";
        size_t pos = 0;
        while ((pos = out.find(token, pos)) != std::string::npos) {
            out.replace(pos, token.size(), value);
            pos += value.size();
        }
    }
    return out;
}

namespace prompts {

// ---------------------------------------------------------------------------
// Report cleaning

inline const PromptTemplate& clean_article() {
    static const PromptTemplate tpl{
        "You are a professional article editor who is good at cleaning and refining "
        "article content.",
        R"(Please help me clean the following research article, removing all citation links, citation marks (such as [1], [2], 1, 2, etc. or other complex citation formats), reference lists, footnotes, and ensuring the content is coherent and smooth.
Keep all other original content of the article, removing only the citations. If the content of the citation mark is used as part of a sentence in the article, keep the text content and remove other marks.

Article content:
"{article}"

Please return the cleaned article in full, without adding any additional comments or explanations.)"};
    return tpl;
}

// ---------------------------------------------------------------------------
// Dynamic dimension weights

inline const PromptTemplate& dimension_weights() {
    static const PromptTemplate tpl{
        "You are an experienced research article evaluation expert. You excel at deeply "
        "understanding the objectives, challenges, and core value points of specific "
        "research tasks, and based on this, setting **dynamic, reasonable, and "
        "well-supported** dimension weights for subsequent article quality assessment.",
        R"(There is a deep research task as follows:

<task>

"{task_prompt}"

</task>

<instruction>

**Background**: The research team will conduct in-depth and comprehensive research based on the `<task>` above and ultimately produce a high-quality research article.

**Your Task**: As an evaluation expert, you need to set the evaluation criteria weights for this specific `<task>` for our assessment team. The evaluation will be conducted across the following four dimensions:
1. **Comprehensiveness:** The breadth, depth, and relevance of information coverage.
2. **Insight:** The depth, originality, logic, and value of the analysis and conclusions.
3. **Instruction Following:** Whether the report accurately and completely responds to all requirements and constraints of the task.
4. **Readability:** Clarity of structure, fluency of language, effectiveness of data presentation, and overall ease of understanding.

**Evaluation Formula**: Total Score = Comprehensiveness * Comprehensiveness Weight + Insight * Insight Weight + Instruction Following * Instruction Following Weight + Readability * Readability Weight. (**Note: The sum of all weights must be exactly 1.0**)

**Core Requirements**:
1. **In-depth Task Analysis**: Carefully study the specific content of the `<task>`, its implicit goals, potential difficulties, and the core value of its outcomes.
2. **Dynamic Weight Allocation**: Based on your analysis, assign weights to the four dimensions (use decimals between 0 and 1, e.g., 0.3). **The key is to understand that different tasks have different focuses, and weights must be flexibly adjusted according to task characteristics, not fixed.**
3. **Justified Allocation**: Explain, in your `<analysis>`, why each dimension received its weight for this specific task.

</instruction>

<examples_rationale>

The following example is provided to demonstrate **how to adjust evaluation dimension weights and explain the reasons based on changes in task nature**. Please focus on learning the **thinking logic and analytical methods** in the example, rather than simply imitating its content or weight values.

</examples_rationale>

<example_1>

<task>

"Analyze the feasibility of investing in electric vehicle (EV) charging infrastructure in suburban areas."

</task>

<output>

<analysis>

This task's core is to provide a clear feasibility analysis for a specific investment. The value lies in the thoroughness of the assessment and the practicality of its conclusions. Therefore, evaluation emphasizes insight and comprehensiveness.
- **Insight (0.35):** The task requires a deep analysis of feasibility, including market demand, costs, competition, and regulatory landscape. The quality of the strategic recommendations derived from this analysis is key.
- **Comprehensiveness (0.30):** A credible feasibility verdict must rest on broad coverage of demand drivers, infrastructure costs, and the competitive landscape.

</analysis>

<json_output>

{
    "comprehensiveness": 0.30,
    "insight": 0.35,
    "instruction_following": 0.20,
    "readability": 0.15
}

</json_output>

</output>

</example_1>

Please strictly follow the above instructions and methods. Now, begin your work on the following specific task:

<task>

"{task_prompt}"

</task>

Please output your `<analysis>` and `<json_output>`.)"};
    return tpl;
}

// ---------------------------------------------------------------------------
// Adaptive criteria generation (parameterized on the dimension under review)

inline const PromptTemplate& criteria_generation() {
    static const PromptTemplate tpl{
        "You are an experienced research article evaluation expert. You excel at breaking "
        "down abstract evaluation dimensions (like \"Comprehensiveness\") into actionable, "
        "clear, and task-specific criteria, assigning appropriate weights and "
        "justifications for each.",
        R"(**Background**: We are evaluating a deep research article written for the following task across four dimensions: Comprehensiveness, Insight, Instruction Following, and Readability.
1. **Comprehensiveness:** The breadth, depth, and relevance of information coverage.
2. **Insight:** The depth, originality, logic, and value of the analysis and conclusions.
3. **Instruction Following:** Whether the report accurately and completely responds to all requirements and constraints of the task.
4. **Readability:** Clarity of structure, fluency of language, effectiveness of data presentation, and overall ease of understanding.

<task>

"{task_prompt}"

</task>

<instruction>

**Your Goal**: For the **{dimension}** dimension of this research article, develop a set of detailed, specific, and highly task-relevant evaluation criteria. You need to:
1. **Analyze Task**: Deeply analyze the `<task>` to identify key information areas, perspectives, and depths that must be covered to achieve "{dimension_lower}."
2. **Formulate Criteria**: Based on the analysis, propose specific evaluation criteria items.
3. **Explain Rationale**: Provide a brief explanation (`explanation`) for each criterion, stating why it is important for assessing the {dimension_lower} of this `<task>`.
4. **Assign Weights**: Give each criterion a weight between 0 and 1; the weights must sum to 1.0 across the list.

**Core Requirements**:
1. **Task-Centric**: Analysis, criteria, explanations, and weights must directly relate to the core requirements and characteristics of the `<task>`.
2. **Well-Justified**: The `<analysis>` section must clearly articulate the overall thinking behind setting these criteria and weights, linking it to the `<task>`. The `explanation` for each criterion must justify its specific relevance.
3. **Parsable Output**: The `<json_output>` must be a valid JSON array.

</instruction>

<example_rationale>

The following example demonstrates **how to formulate criteria based on task requirements**. Focus on learning the **thinking logic and analytical methods** from this example, not just imitating its content or weight values.

</example_rationale>

<example>

<task>

"Analyze the impact of remote work trends on commercial real estate in major US cities and recommend investment strategies."

</task>

<output>

<analysis>

To comprehensively evaluate a research article on "the impact of remote work on commercial real estate in major US cities and recommended investment strategies," considerations must span multiple dimensions. This task has a dual objective: first, to analyze the market impact, and second, to propose actionable investment strategies based on this analysis. Therefore, a comprehensive assessment must ensure the article covers key drivers of change in commercial real estate due to remote work, and thoroughly examines various investment approaches.

Specifically, evaluation criteria need to cover:
1. **Remote Work Trends & Adoption Data**: Coverage of current and projected remote/hybrid work models, adoption rates across industries and demographics.
2. **Impact on Commercial Real Estate Sectors**: Analysis of effects on office, retail, and industrial spaces, including vacancy rates, leasing trends, and property valuations in major US cities.
3. **Geographical Variations**: Examination of how impacts differ across various major US cities (e.g., tech hubs vs. financial centers, downtown vs. suburban).

Weight allocation should be balanced between the impact analysis (remote work trends, sector impacts, geographical variations) and the investment strategy section, as both are critical to fulfilling the task. Within impact analysis, specific sector impacts and geographical variations are key to actionable insights.

</analysis>

<json_output>

[
  {
    "criterion": "Analysis of Remote Work Trends and Adoption",
    "explanation": "Assesses if the article thoroughly examines current and projected remote/hybrid work models, adoption statistics across different industries, and demographic factors influencing these trends. This forms the basis of the impact analysis.",
    "weight": 0.15
  },
  {
    "criterion": "Comprehensive Coverage of CRE Sector Impacts",
    "explanation": "Evaluates if the article details the impact on various commercial real estate (CRE) sectors (office, retail, industrial, etc.), including data on vacancy rates, rental trends, and property valuations in major US cities.",
    "weight": 0.20
  },
  {
    "criterion": "Examination of Geographical Variations and Nuances",
    "explanation": "Checks if the article analyzes how the impact of remote work on CRE differs across various major US cities, considering their unique economic structures and demographic profiles.",
    "weight": 0.15
  },
  {
    "criterion": "Discussion of Broader Economic and Social Consequences",
    "explanation": "Assesses coverage of wider implications, such as effects on urban planning, transportation, local economies dependent on office workers, and ancillary businesses.",
    "weight": 0.10
  }
]

</json_output>

</output>

</example>

Please strictly follow the above instructions and methods. Now, begin your work on the following specific task:

<task>

"{task_prompt}"

</task>

Please output your `<analysis>` and `<json_output>`.)"};
    return tpl;
}

// ---------------------------------------------------------------------------
// Comparative scoring (target and reference side by side)

namespace detail_prompts {

inline std::string pairwise_body(const std::string& criteria_intro) {
    return R"(**Task Background**

There is a deep research task, and you need to evaluate two research articles written for this task. We will assess the articles across four dimensions: Comprehensiveness, Insight, Instruction Following, and Readability. The content is as follows:

<task>

"{task_prompt}"

</task>

**Articles to Evaluate**

<article_1>

"{article_1}"

</article_1>

<article_2>

"{article_2}"

</article_2>

**Evaluation Criteria**
)" + criteria_intro +
           R"(

<criteria_list>

{criteria_list}

</criteria_list>

<Instruction>

**Your Task**

Please strictly evaluate and compare `<article_1>` and `<article_2>` based on **each criterion** in the `<criteria_list>`. You need to:

1. **Analyze Each Criterion**: Consider how each article fulfills the requirements of each criterion.
2. **Comparative Evaluation**: Analyze how the two articles perform on each criterion, referencing the content and criterion explanation.
3. **Score Separately**: Based on your comparative analysis, score each article on each criterion (0-10 points).

**Scoring Rules**

For each criterion, score both articles on a scale of 0-10 (continuous values). The score should reflect the quality of performance on that criterion:

- 0-2 points: Very poor performance. Almost completely fails to meet the criterion requirements.
- 2-4 points: Poor performance. Minimally meets the criterion requirements with significant deficiencies.
- 4-6 points: Average performance. Basically meets the criterion requirements, neither good nor bad.
- 6-8 points: Good performance. Largely meets the criterion requirements with notable strengths.
- 8-10 points: Excellent/outstanding performance. Fully meets or exceeds the criterion requirements.

**Output Format Requirements**

Please **strictly** follow the `<output_format>` below for each criterion evaluation. **Do not include any other unrelated content, introduction, or summary**. Start with "Standard 1" and proceed sequentially through all criteria:

</Instruction>

<output_format>

{
    "comprehensiveness": [
        {
            "criterion": [Text content of the first comprehensiveness evaluation criterion],
            "analysis": [Comparative analysis],
            "article_1_score": [Continuous score 0-10],
            "article_2_score": [Continuous score 0-10]
        },
        ...
    ],
    "insight": [
        {
            "criterion": [Text content of the first insight evaluation criterion],
            "analysis": [Comparative analysis],
            "article_1_score": [Continuous score 0-10],
            "article_2_score": [Continuous score 0-10]
        },
        ...
    ],
    "instruction_following": [
        ...
    ],
    "readability": [
        ...
    ]
}

</output_format>

Now, please evaluate the two articles based on the research task and criteria, providing detailed comparative analysis and scores according to the requirements above. Ensure your output follows the specified `<output_format>` and that the JSON format is parsable, with all characters that might cause JSON parsing errors properly escaped.)";
}

}  // namespace detail_prompts

inline const PromptTemplate& pairwise_score() {
    static const PromptTemplate tpl{
        "You are a strict, meticulous, and objective research article evaluation expert. "
        "You excel at using specific assessment criteria to deeply compare two articles on "
        "the same task, providing precise scores and clear justifications.",
        detail_prompts::pairwise_body(
            "Now, you need to evaluate and compare these two articles based on the "
            "following **evaluation criteria list**, providing comparative analysis and "
            "scoring each on a scale of 0-10. Each criterion includes an explanation, "
            "please understand carefully.")};
    return tpl;
}

inline const PromptTemplate& static_score() {
    static const PromptTemplate tpl{
        "You are a strict, meticulous, and objective research article evaluation expert. "
        "You excel at using specific assessment criteria to deeply compare two articles on "
        "the same task, providing precise scores and clear justifications.",
        detail_prompts::pairwise_body(
            "Now, you need to evaluate and compare these two articles based on the "
            "following **fixed evaluation criteria list**, providing comparative analysis "
            "and scoring each on a scale of 0-10. Each criterion includes an explanation, "
            "please understand carefully.")};
    return tpl;
}

// ---------------------------------------------------------------------------
// Point-wise scoring (target only)

inline const PromptTemplate& pointwise_score() {
    static const PromptTemplate tpl{
        "You are a strict, meticulous, and objective research article evaluation expert. "
        "You excel at using specific assessment criteria to thoroughly evaluate research "
        "articles, providing precise scores and clear justifications.",
        R"(**Task Background**

There is a deep research task, and you need to evaluate a research article written for this task.

We will assess the article across four dimensions: Comprehensiveness, Insight, Instruction Following, and Readability.

The content is as follows:

<task>

"{task_prompt}"

</task>

**Article to Evaluate**

<target_article>

"{article}"

</target_article>

**Evaluation Criteria**

Now, you need to evaluate this article based on the following **evaluation criteria list**, providing analysis and scoring each on a scale of 0-10.

Each criterion includes an explanation, please understand carefully.

<criteria_list>

{criteria_list}

</criteria_list>

<Instruction>

**Your Task**

Please strictly evaluate `<target_article>` based on **each criterion** in the `<criteria_list>`.

You need to:
1. **Analyze Each Criterion**: Consider how the article fulfills the requirements of each criterion.
2. **Analysis and Evaluation**: Analyze the article's performance on each criterion, referencing the content and criterion explanation, noting strengths and weaknesses.
3. **Score**: Based on your analysis, score the article on each criterion (0-10 points).

**Scoring Rules**

For each criterion, score the article on a scale of 0-10 (continuous values).

The score should reflect the quality of performance on that criterion:
- 0-2 points: Very poor performance. Almost completely fails to meet the criterion requirements.
- 2-4 points: Poor performance. Minimally meets the criterion requirements with significant deficiencies.
- 4-6 points: Average performance. Basically meets the criterion requirements, neither good nor bad.
- 6-8 points: Good performance. Largely meets the criterion requirements with notable strengths.
- 8-10 points: Excellent/outstanding performance. Fully meets or exceeds the criterion requirements.

**Output Format Requirements**

Please **strictly** follow the `<output_format>` below for each criterion evaluation.

**Do not include any other unrelated content, introduction, or summary**.

Start with "Standard 1" and proceed sequentially through all criteria:

</Instruction>

<output_format>

{
    "comprehensiveness": [
        {
            "criterion": [Text content of the first comprehensiveness evaluation criterion],
            "analysis": [Analysis],
            "target_score": [Continuous score 0-10]
        },
        ...
    ],
    "insight": [
        ...
    ],
    "instruction_following": [
        ...
    ],
    "readability": [
        ...
    ]
}

</output_format>

Now, please evaluate the article based on the research task and criteria, providing detailed analysis and scores according to the requirements above.

Ensure your output follows the specified `<output_format>` and that the JSON format is parsable, with all characters that might cause JSON parsing errors properly escaped.)"};
    return tpl;
}

// ---------------------------------------------------------------------------
// Vanilla single-number scoring

inline const PromptTemplate& vanilla_score() {
    static const PromptTemplate tpl{
        "You are a strict, meticulous, and objective research article evaluation expert. "
        "You excel at using specific assessment criteria to thoroughly evaluate research "
        "articles, providing precise scores and clear justifications.",
        R"(**Task Background**

There is a deep research task, and you need to evaluate a research article written for this task.

<task>

"{task_prompt}"

</task>

**Article to Evaluate**

<target_article>

"{article}"

</target_article>

<Instruction>

**Your Task**

Please evaluate the overall quality of the above `<target_article>` as a response to `<task>`.

Please provide an overall score between 0 and 10.

Also, provide a brief justification for your score.

**Output Format Requirements**

Please **strictly** follow the `<output_format>` below for your evaluation result.

**Do not include any other unrelated content, introduction, or summary**.

</Instruction>

<output_format>

{
    "overall_score": [Continuous score 0-10],
    "justification": "[Scoring justification]"
}

</output_format>

Now, please evaluate the article based on the task and provide your score and justification according to the specified format.

Ensure your output is valid JSON format and escape any special characters as needed.)"};
    return tpl;
}

// ---------------------------------------------------------------------------
// Citation pipeline prompts

inline const PromptTemplate& citation_extraction() {
    static const PromptTemplate tpl{
        "You are a meticulous fact-checking assistant. You excel at isolating the discrete "
        "factual claims a research article attributes to its cited sources.",
        R"(Below is a list of candidate statement-URL pairs extracted from a research article. Each statement is a sentence that carried a citation marker pointing at the URL.

Refine this list into discrete, self-contained factual statements:
1. Split any statement that bundles several independent facts into one entry per fact, keeping the same URL.
2. Drop entries that contain no verifiable factual claim (pure opinions, headings, transitions).
3. Keep the statement wording otherwise faithful to the article.

<candidate_pairs>

{candidate_pairs}

</candidate_pairs>

Return a JSON array, one object per retained pair:

[
    {"statement": "<discrete factual statement>", "url": "<cited url>"},
    ...
]

Ensure the output is valid JSON with no surrounding commentary.)"};
    return tpl;
}

inline const PromptTemplate& citation_dedup() {
    static const PromptTemplate tpl{
        "You are a meticulous fact-checking assistant. You excel at recognizing when two "
        "differently worded statements describe exactly the same fact.",
        R"(All of the statements below cite the same source:

<url>

{url}

</url>

<statements>

{statements}

</statements>

Group the statement indices so that statements describing **exactly the same fact** share a group. Statements making distinct claims must be in separate groups, even if they are topically related.

Return a JSON object:

{
    "groups": [[0, 2], [1], ...]
}

Every index must appear in exactly one group. Ensure the output is valid JSON with no surrounding commentary.)"};
    return tpl;
}

inline const PromptTemplate& support_judgment() {
    static const PromptTemplate tpl{
        "You are a strict fact-verification expert. You judge whether a cited web page "
        "provides sufficient evidence for a statement, relying only on the page content "
        "provided.",
        R"(<statement>

{statement}

</statement>

<webpage_content>

{page_text}

</webpage_content>

Decide whether the webpage content provides sufficient evidence to support the statement. Paraphrase counts as support when the substance matches; related-but-different claims do not.

Return a JSON object:

{
    "verdict": "support" or "not_support",
    "evidence": "<one-line quote or summary of the deciding passage, or why none exists>"
}

Ensure the output is valid JSON with no surrounding commentary.)"};
    return tpl;
}

// ---------------------------------------------------------------------------
// Task curation prompts

inline const PromptTemplate& deep_research_screen() {
    static const PromptTemplate tpl{
        "You are a precise query triage assistant for a research assistant product.",
        R"(A deep research task is a problem that requires an agent to conduct multiple rounds of web searches, gather information, perform analysis, and produce a high-quality report.

Classify the user query below: does it call for deep research as defined above, or can it be answered directly without one?

<query>

{query}

</query>

Return a JSON object:

{
    "decision": "keep" or "drop"
}

"keep" means the query is a deep research task. Ensure the output is valid JSON with no surrounding commentary.)"};
    return tpl;
}

inline const PromptTemplate& topic_classification() {
    static const PromptTemplate tpl{
        "You are a precise query classification assistant.",
        R"(Assign the user query below to exactly one topic domain from the list.

<topics>

{topics}

</topics>

<query>

{query}

</query>

Return a JSON object:

{
    "topic": "<one label copied verbatim from the list>"
}

Ensure the output is valid JSON with no surrounding commentary.)"};
    return tpl;
}

// ---------------------------------------------------------------------------
// Built-in static rubric used by the static-criteria mode when no rubric
// file is supplied. Uniform dimension weights, four criteria per dimension.

inline const char* static_rubric_json() {
    return R"({
  "task_id": "",
  "provenance": "static",
  "dimension_weights": {
    "comprehensiveness": 0.25,
    "insight": 0.25,
    "instruction_following": 0.25,
    "readability": 0.25
  },
  "criteria": {
    "comprehensiveness": [
      {"statement": "Information Coverage Breadth", "explanation": "Evaluates whether the article covers all key areas and aspects related to the topic without omitting important information.", "weight": 0.25},
      {"statement": "Information Depth and Detail", "explanation": "Evaluates whether the article provides sufficiently detailed information rather than just surface-level overviews.", "weight": 0.25},
      {"statement": "Source and Perspective Diversity", "explanation": "Evaluates whether the article draws on a diverse range of sources and viewpoints rather than a narrow slice of the available material.", "weight": 0.25},
      {"statement": "Relevance of Included Information", "explanation": "Evaluates whether the included material is pertinent to the topic rather than padding.", "weight": 0.25}
    ],
    "insight": [
      {"statement": "Analysis Depth and Originality", "explanation": "Evaluates whether the article provides deep analysis and original insights rather than simply repeating known information.", "weight": 0.25},
      {"statement": "Logical Rigor of Arguments", "explanation": "Evaluates whether conclusions follow from the presented evidence through sound reasoning.", "weight": 0.25},
      {"statement": "Value of Conclusions and Recommendations", "explanation": "Evaluates whether the conclusions and recommendations are actionable and valuable for the task's audience.", "weight": 0.25},
      {"statement": "Evidence-Backed Reasoning", "explanation": "Evaluates whether analytical claims are grounded in data or cited evidence rather than speculation.", "weight": 0.25}
    ],
    "instruction_following": [
      {"statement": "Direct Response to the Task", "explanation": "Evaluates whether the article directly answers the questions posed by the task.", "weight": 0.25},
      {"statement": "Coverage of All Stated Requirements", "explanation": "Evaluates whether every explicit requirement or sub-question of the task is addressed.", "weight": 0.25},
      {"statement": "Adherence to Constraints", "explanation": "Evaluates whether the article respects any constraints the task imposes (scope, region, timeframe, format).", "weight": 0.25},
      {"statement": "Focus Without Digression", "explanation": "Evaluates whether the article stays on the research topic without drifting into unrelated material.", "weight": 0.25}
    ],
    "readability": [
      {"statement": "Structural Clarity", "explanation": "Evaluates whether the article has a clear structure that guides the reader through the material.", "weight": 0.25},
      {"statement": "Language Fluency", "explanation": "Evaluates whether the language is fluent, precise, and free of distracting errors.", "weight": 0.25},
      {"statement": "Effectiveness of Data Presentation", "explanation": "Evaluates whether figures, tables, and numbers are presented in a way that aids understanding.", "weight": 0.25},
      {"statement": "Overall Ease of Understanding", "explanation": "Evaluates whether a domain-literate reader can follow the article without undue effort.", "weight": 0.25}
    ]
  }
})";
}

}  // namespace prompts
}  // namespace reval
