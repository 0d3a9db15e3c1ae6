#pragma once

// Deterministic stand-in for the teacher model used by hermetic pipeline
// runs: 5 functions x 2 batches, of which 3 samples fail execution, 2
// mismatch the oracle and 5 validate.

#include <atomic>
#include <map>
#include <mutex>
#include <string>

#include "xlsynth/chat.hpp"

namespace xlsynth::testing {

class ScriptedTeacher : public ChatClient {
public:
    explicit ScriptedTeacher(std::string abs_doc_qa_response);
    std::string chat(const ChatRequest& req) override;

    static const std::vector<std::string>& functions();

private:
    std::string abs_doc_qa_;
    std::mutex mu_;
    std::map<std::string, int> generations_;
};

}  // namespace xlsynth::testing
