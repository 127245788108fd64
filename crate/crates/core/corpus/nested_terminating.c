int main(void) {
    int i;
    int j;
    int s = 0;
    for (i = 0; i < 5; i++) {
        for (j = 0; j < i; j++) {
            s = s + j;
        }
    }
    return s;
}
