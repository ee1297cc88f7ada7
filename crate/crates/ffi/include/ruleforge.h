#ifndef RULEFORGE_H
#define RULEFORGE_H

/* Generated by cbindgen from ruleforge-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible call.
typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_ARGUMENT = 1,
  RF_STATUS_INVALID_UTF8 = 2,
  RF_STATUS_PARSE_ERROR = 3,
  RF_STATUS_CHAIN_ERROR = 4,
  RF_STATUS_PANIC = 5,
} RfStatus;

// An owned rule handle.
typedef struct RfRule RfRule;

// An owned vocabulary handle.
typedef struct RfVocabulary RfVocabulary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Most recent error on this thread, or NULL. Free with `rf_string_free`.
char *rf_last_error_message(void);

// Frees a string returned by this library. NULL is accepted.
//
// # Safety
// `text` must have been returned by a `ruleforge` call and not freed yet.
void rf_string_free(char *text);

// Creates the default vocabulary (32 abstract objects, 18 properties).
struct RfVocabulary *rf_vocabulary_default(void);

// Frees a vocabulary handle. NULL is accepted.
//
// # Safety
// `vocab` must come from `rf_vocabulary_default` and not be freed twice.
void rf_vocabulary_free(struct RfVocabulary *vocab);

// Parses one `Conclusion:- Premise` rule into a new handle.
//
// # Safety
// `text` must be a valid NUL-terminated string; `out` must be writable.
enum RfStatus rf_rule_parse(const char *text, struct RfRule **out);

// Frees a rule handle. NULL is accepted.
//
// # Safety
// `rule` must come from this library and not be freed twice.
void rf_rule_free(struct RfRule *rule);

// Writes the canonical serialization of a rule.
//
// # Safety
// `rule` must be a live handle; `out` must be writable.
enum RfStatus rf_rule_serialize(const struct RfRule *rule, char **out);

// Writes the `If ..., then ...` verbalization of a rule.
//
// # Safety
// `rule` and `vocab` must be live handles; `out` must be writable.
enum RfStatus rf_rule_verbalize(const struct RfRule *rule,
                                const struct RfVocabulary *vocab,
                                char **out);

// Creates a copy of the rule with its conclusion negation toggled.
//
// # Safety
// `rule` must be a live handle; `out` must be writable.
enum RfStatus rf_rule_negate_conclusion(const struct RfRule *rule, struct RfRule **out);

// Number of premise facts; 0 when the handle is NULL.
//
// # Safety
// `rule` must be a live handle or NULL.
uint32_t rf_rule_length(const struct RfRule *rule);

// Compositional depth; 0 when the handle is NULL.
//
// # Safety
// `rule` must be a live handle or NULL.
uint32_t rf_rule_depth(const struct RfRule *rule);

// 1 when the conclusion is negated, 0 when positive, -1 on NULL.
//
// # Safety
// `rule` must be a live handle or NULL.
int32_t rf_rule_is_negative(const struct RfRule *rule);

// Writes a JSON array of the three validity reports, e.g.
// `[{"check":"grammar","reasons":[]}, ...]`.
//
// # Safety
// `rule` and `vocab` must be live handles; `out` must be writable.
enum RfStatus rf_rule_validity_json(const struct RfRule *rule,
                                    const struct RfVocabulary *vocab,
                                    char **out);

// One backward-chaining step: replaces `host` premise fact `fact_index`
// with the premise of `sub`.
//
// # Safety
// `host` and `sub` must be live handles; `out` must be writable.
enum RfStatus rf_backward_chain(const struct RfRule *host,
                                uint32_t fact_index,
                                const struct RfRule *sub,
                                struct RfRule **out);

// One forward-chaining step: swaps the conclusion of `host` for the
// conclusion of the single-fact rule `sub`.
//
// # Safety
// `host` and `sub` must be live handles; `out` must be writable.
enum RfStatus rf_forward_chain(const struct RfRule *host,
                               const struct RfRule *sub,
                               struct RfRule **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RULEFORGE_H */
